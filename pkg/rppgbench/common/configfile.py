import collections
import json
from pathlib import Path
from typing import Mapping, Optional, Union

from rppgbench.exceptions import ConfigFileNotFound, ConfigInvalid

BENCH_SCHEMA = Path(__file__).parent.parent / "schemas" / "bench.schema.yaml"


def _load_configfile(configpath_or_obj, filetype="Config"):
    "Tries to load a configfile first as JSON, then as YAML, into a dict."
    import yaml

    if isinstance(configpath_or_obj, str) or isinstance(configpath_or_obj, Path):
        try:
            obj = open(configpath_or_obj, encoding="utf-8")
        except FileNotFoundError:
            raise ConfigFileNotFound(configpath_or_obj)
    else:
        obj = configpath_or_obj

    with obj as f:
        try:
            return json.load(f, object_pairs_hook=collections.OrderedDict)
        except ValueError:
            f.seek(0)  # try again
        try:
            import yte

            return yte.process_yaml(f, require_use_yte=True)
        except yaml.YAMLError as e:
            raise ConfigInvalid(
                f"{filetype} file is not valid JSON or YAML ({e}). "
                "In case of YAML, make sure to not mix "
                "whitespace and tab indentation."
            )


def load_configfile(configpath):
    "Loads a JSON or YAML configfile as a dict, then checks that it's a dict."
    config = _load_configfile(configpath)
    if not isinstance(config, dict):
        raise ConfigInvalid(
            "Config file must be given as JSON or YAML with keys at top level."
        )
    config = dict(config)
    # yte marker, not part of the config itself
    config.pop("__use_yte__", None)
    return config


def validate(data: Mapping, schema: Optional[Union[str, Path]] = None, set_default=True):
    """Validate data with the JSON schema at the given path.

    Args:
        data (dict): the config dict to validate; defaults declared by the
            schema are filled in place when set_default is True.
        schema (str): path to a JSON or YAML schema, the bundled benchmark
            schema by default.
    """
    import jsonschema
    from jsonschema import validators

    schema = _load_configfile(schema or BENCH_SCHEMA, filetype="Schema")

    # Taken from https://python-jsonschema.readthedocs.io/en/latest/faq/
    def extend_with_default(validator_class):
        validate_properties = validator_class.VALIDATORS["properties"]

        def set_defaults(validator, properties, instance, schema):
            for property, subschema in properties.items():
                if "default" in subschema:
                    instance.setdefault(property, subschema["default"])

            for error in validate_properties(validator, properties, instance, schema):
                yield error

        return validators.extend(validator_class, {"properties": set_defaults})

    Validator = validators.validator_for(schema)
    if set_default:
        Validator = extend_with_default(Validator)
    error = jsonschema.exceptions.best_match(Validator(schema).iter_errors(data))
    if error is not None:
        field = ".".join(str(p) for p in error.absolute_path) or None
        raise ConfigInvalid(error.message, field=field)
