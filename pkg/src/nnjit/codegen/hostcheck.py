"""Host capability gate for the generated code."""

import platform
import sys

from ..errors import UnsupportedHost


def check_host():
    """Raise UnsupportedHost unless this process can run the emitted code."""
    machine = platform.machine().lower()
    if machine not in ("x86_64", "amd64"):
        raise UnsupportedHost(f"x86-64 host required, running on {machine!r}")
    if not (sys.platform.startswith("linux") or sys.platform == "darwin"):
        raise UnsupportedHost(f"cannot map executable pages on {sys.platform!r}")
    if sys.platform.startswith("linux"):
        try:
            with open("/proc/cpuinfo") as fh:
                info = fh.read()
        except OSError:
            return          # no cpuinfo to consult; assume a normal x86-64
        if "sse4_1" not in info:
            raise UnsupportedHost("cpu does not report sse4.1")
