"""Time changes of horocycle flows: flows, operator calculus and spectral diagnostics."""

__version__ = "0.1.0"

from .fields import ScalarField  # noqa: E402
from .flows import FlowBackend, make_backend  # noqa: E402
from .surface import FuchsianGroup, build_bolza  # noqa: E402

__all__ = ["ScalarField", "FlowBackend", "make_backend", "FuchsianGroup", "build_bolza", "__version__"]
