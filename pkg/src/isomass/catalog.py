"""Built-in benchmark geometries shipped as JSON (schema 1) inside the package."""

import json
from importlib import resources

from .exceptions import ConfigError
from .io import geometry_from_dict

__all__ = ["catalog", "list_geometries"]


def _files():
    return resources.files("isomass") / "geometries"


def list_geometries():
    """Sorted names of the catalog entries."""
    return sorted(f.name[:-5] for f in _files().iterdir() if f.name.endswith(".json"))


def catalog(name, d=None):
    """Load a catalog geometry by name.

    Returns a :class:`~isomass.geometry.Patch` for single-patch entries and a
    :class:`~isomass.geometry.MultipatchGeometry` otherwise.  ``d``, if given,
    must match the dimension of the entry.
    """
    names = list_geometries()
    if name not in names:
        raise ConfigError(f"unknown geometry {name!r}; valid names: {', '.join(names)}")
    geom = geometry_from_dict(json.loads((_files() / f"{name}.json").read_text()))
    if d is not None and geom.dim != int(d):
        raise ConfigError(f"geometry {name!r} has dimension {geom.dim}, requested {d}")
    return geom
