from .errors import *
from .network import *
from .scattering import *
from .initial_data import *
from .charsim import *
from .spectrum import *
from .fdref import *
