from .core.exceptions import *
from .config import RunConfig
from .graph import Entity, Triplet, GraphDelta, WorldGraph
from .agent import Agent
