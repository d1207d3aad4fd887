from .config import RunConfig, load_config
from .runner import RunRecord, compare, gradcheck, run
