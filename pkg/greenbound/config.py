import copy
import json
import os

from ._prototype import ConfigError


def check_file_exists(file_path):
    return os.path.isfile(file_path)


def read_json_file(file_path, encode='utf-8-sig'):
    if not check_file_exists(file_path):
        raise ConfigError(f"File not found: {file_path}")
    with open(file_path, 'r', encoding=encode) as file:
        try:
            return json.load(file)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON in {file_path}: {e.msg}", line=e.lineno, column=e.colno)


def deep_get(dictionary: dict, dotted_key: str):
    keys = dotted_key.split(".")
    for key in keys:
        if isinstance(dictionary, dict):
            dictionary = dictionary.get(key)
        else:
            return None
    return dictionary


def deep_set(dictionary: dict, dotted_key: str, value):
    """Copy of `dictionary` with `dotted_key` set, creating intermediate objects."""
    out = copy.deepcopy(dictionary)
    node = out
    keys = dotted_key.split(".")
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = node[key] = {}
        elif not isinstance(child, dict):
            raise ConfigError("Cannot descend into non-object value", field=dotted_key)
        node = child
    node[keys[-1]] = value
    return out


def check_and_get(config, target):
    val = deep_get(config, target) if isinstance(config, dict) else None
    if val is not None:
        return val
    raise ConfigError(f"Require value {target}", field=target)
