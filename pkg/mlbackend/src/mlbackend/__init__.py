"""mlbackend: reference adapter serving real models behind the copyaudit
backend wire protocol."""

from .config import AdapterConfig
from .server import create_app

__version__ = "0.1.0"
