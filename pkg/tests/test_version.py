import tempfile
import unittest
from pathlib import Path

from tools.version import check_version, read_init_version, read_version, set_version


PACKAGE_ROOT = Path(__file__).resolve().parents[1]


def _write_version_sources(package_root, manifest_version, init_version):
    """A throwaway package root carrying just the two files that hold a version."""
    (package_root / "pyproject.toml").write_text(
        f'[project]\nname = "daclin"\nversion = "{manifest_version}"\n',
        encoding="utf-8",
    )
    (package_root / "__init__.py").write_text(
        f'"""Doc."""\n\n__version__ = "{init_version}"\nraise RuntimeError("must not import")\n',
        encoding="utf-8",
    )
    return package_root


class VersionTests(unittest.TestCase):
    def test_checkout_versions_agree(self):
        self.assertEqual(check_version(PACKAGE_ROOT), read_init_version(PACKAGE_ROOT))

    def test_version_is_read_without_importing_the_package(self):
        with tempfile.TemporaryDirectory() as temporary_directory:
            root = _write_version_sources(Path(temporary_directory), "9.8.7", "9.8.7")
            self.assertEqual(check_version(root), "9.8.7")

    def test_a_drifted_copy_is_reported_with_the_repair_command(self):
        with tempfile.TemporaryDirectory() as temporary_directory:
            root = _write_version_sources(Path(temporary_directory), "9.8.7", "1.2.3")
            with self.assertRaisesRegex(ValueError, "tools/version.py 9.8.7"):
                check_version(root)

    def test_set_version_updates_both_files(self):
        with tempfile.TemporaryDirectory() as temporary_directory:
            root = _write_version_sources(Path(temporary_directory), "0.1.0", "0.1.0")
            set_version(root, "0.2.0")

            self.assertEqual(read_version(root), "0.2.0")
            self.assertEqual(read_init_version(root), "0.2.0")
            self.assertIn('name = "daclin"', (root / "pyproject.toml").read_text(encoding="utf-8"))

    def test_malformed_versions_are_refused(self):
        with tempfile.TemporaryDirectory() as temporary_directory:
            root = _write_version_sources(Path(temporary_directory), "0.1.0", "0.1.0")
            with self.assertRaises(ValueError):
                set_version(root, "v2")
            self.assertEqual(read_version(root), "0.1.0")


if __name__ == "__main__":
    unittest.main()
