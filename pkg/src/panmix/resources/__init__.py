"""Bundled data files: the default lab configuration and report schemas."""

from importlib import resources


def resource_text(name: str) -> str:
    return (resources.files(__package__) / name).read_text()


def resource_path(name: str):
    return resources.files(__package__) / name
