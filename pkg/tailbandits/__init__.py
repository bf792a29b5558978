"""
tailbandits - Regret tail simulation lab for stochastic, baseline-reward and linear bandits
Tail-optimal SE / SEwRP / UCB / UCB-L policies, closed-form tail bounds, and an exact oracle
"""

__version__ = "0.1.0"

# Import main modules for easy access
from . import errors
from . import env
from . import policy
from . import sim
from . import linear
from . import stats
from . import bounds
from . import experiment

__all__ = ['errors', 'env', 'policy', 'sim', 'linear', 'stats', 'bounds', 'experiment']
