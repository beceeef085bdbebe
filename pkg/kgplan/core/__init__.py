from .exceptions import *
from .utils import normalize_name, atomic_write, FileLock
