"""Skip the exporter suite when the optional exporter is not installed.

The engine's own tests never touch it, so a checkout with only the core
package still runs cleanly.
"""

import importlib.util


def pytest_ignore_collect(collection_path, config):
    if "exporter" not in collection_path.parts:
        return None
    if importlib.util.find_spec("musef_exporter") is None:
        return True
    return None
