"""The one place the package version is set.

``pyproject.toml`` holds the version. ``__version__`` in ``__init__.py`` is a
copy kept as a plain literal so ``daclin --version`` works from a checkout
without installed metadata. The copy is written by this module rather than by
hand::

    python tools/version.py            # print the current version
    python tools/version.py 0.2.0      # set it everywhere

A copy that drifted out of sync is reported as an error, so the package never
ships two different version numbers.
"""

import argparse
import re
import sys
from pathlib import Path


MANIFEST_NAME = "pyproject.toml"
INIT_NAME = "__init__.py"

VERSION_PATTERN = re.compile(r"^\d+\.\d+\.\d+$")
_MANIFEST_LINE = re.compile(r'^version\s*=\s*"([^"]*)"\s*$', flags=re.MULTILINE)
_INIT_LINE = re.compile(r'^__version__\s*=\s*"([^"]*)"\s*$', flags=re.MULTILINE)


def read_version(package_root):
    """The package version, from the manifest."""
    manifest_path = Path(package_root) / MANIFEST_NAME
    match = _MANIFEST_LINE.search(manifest_path.read_text(encoding="utf-8"))
    if match is None:
        raise ValueError(f"Could not read the version from {manifest_path}")
    return match.group(1)


def read_init_version(package_root):
    """The copy carried by ``__version__``."""
    init_path = Path(package_root) / INIT_NAME
    match = _INIT_LINE.search(init_path.read_text(encoding="utf-8"))
    if match is None:
        raise ValueError(f"Could not read __version__ from {init_path}")
    return match.group(1)


def check_version(package_root):
    """Return the version, or explain how to repair a mismatch."""
    version = read_version(package_root)
    init_version = read_init_version(package_root)
    if version != init_version:
        raise ValueError(
            f"{MANIFEST_NAME} says {version} but {INIT_NAME} says {init_version}. "
            f"Run `python tools/version.py {version}` to set both."
        )
    return version


def _replace(path, pattern, replacement, what):
    text = path.read_text(encoding="utf-8")
    text, replacements = pattern.subn(replacement, text, count=1)
    if not replacements:
        raise ValueError(f"Could not find {what} in {path}")
    path.write_text(text, encoding="utf-8")


def set_version(package_root, version):
    """Write ``version`` to the manifest and to ``__version__``."""
    if not VERSION_PATTERN.match(version):
        raise ValueError(f"Expected a version like 0.2.0, got '{version}'")
    package_root = Path(package_root)
    _replace(package_root / MANIFEST_NAME, _MANIFEST_LINE, f'version = "{version}"', "the version line")
    _replace(package_root / INIT_NAME, _INIT_LINE, f'__version__ = "{version}"', "__version__")
    return version


def main(argv=None):
    package_root = Path(__file__).resolve().parents[1]
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("version", nargs="?", help="New version, e.g. 0.2.0. Omit to print the current one.")
    args = parser.parse_args(argv)

    if args.version is None:
        try:
            print(check_version(package_root))
        except ValueError as error:
            print(error, file=sys.stderr)
            return 1
        return 0

    print(f"{read_version(package_root)} -> {set_version(package_root, args.version)}")
    print(f"Updated {MANIFEST_NAME} and {INIT_NAME}.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
