# Order matters: experiment needs coreseg.config, which needs the
# modules above it.
from .data import *
from .backbone import *
from .conditioning import *
from .reconstruction import *
from .openset import *
from .evaluation import *
from .report import *
from .experiment import *
from . import (backbone, conditioning, data, evaluation, experiment, openset,
               reconstruction, report)

__all__ = (
    data.__all__ + backbone.__all__ + conditioning.__all__
    + reconstruction.__all__ + openset.__all__ + evaluation.__all__
    + report.__all__ + experiment.__all__
)
