from bvsim import base
from bvsim.base import ConfigurationError
from bvsim.data.scenario import Scenario, parse_scenario

# Vertices of the bridging polylines for the jump (0, 0) -> (1, 1); None keeps the straight chord.
_BRIDGES = {
    'u1_first': "0, 0; 1, 0; 1, 1",
    'u2_first': "0, 0; 0, 1; 1, 1",
    'diagonal': None,
}

_EX21 = """
[dynamics]
n = 6
m = 3
l = 0
f = "0", "0", "0", "0", "-1", "(x3-x5)^2 + x1^2 + x2^2"
g1 = "1", "0", "x2", "0", "0", "0"
g2 = "0", "1", "-x1", "0", "0", "0"
g3 = "0", "0", "0", "x4", "0", "0"

[input]
breakpoints = 0, 1
segment.1 = "(cos(k*t)-1)/sqrt(k)", "sin(k*t)/sqrt(k)", "t"

[initial]
x = 0, 0, 1, 1, 1, 0

[solver]
step = 1e-4

[sweep]
ks = 25, 100, 400
taus = 0.25, 0.5, 1

[limit]
u = "0", "0", "t"
x = "0", "0", "1-t", "exp(t)", "1-t", "0"

[cost]
phi = "t"
times = 0, 0.25, 0.5, 0.75, 1
"""

_STEP_2D = """
[dynamics]
n = 2
m = 2
f = "0", "0"
g1 = {g1}
g2 = {g2}

[input]
breakpoints = 0, 0.5, 1
table.1 = 0: 0, 0; 0.5: 0, 0
table.2 = 0.5: 1, 1; 1: 1, 1
control_set = box
lower = 0, 0
upper = 1, 1
whitney = 1.5

[initial]
x = {x0}

[solver]
step = 1e-4
grid = 4096

[sweep]
ks = 8, 32, 128
taus = 0.25, 0.5, 1
"""

_AC_LOOP = """
[dynamics]
n = 2
m = 2
f = "-x1", "0"
g1 = "1", "0"
g2 = "0", "x1"

[input]
# Square loop traversed at constant speed.
breakpoints = 0, 1
table.1 = 0: 0, 0; 0.25: 1, 0; 0.5: 1, 1; 0.75: 0, 1; 1: 0, 0

[initial]
x = 0, 0

[solver]
step = 1e-4

[sweep]
ks = 8, 32, 128
taus = 0.25, 0.5, 1
"""

_STEP_LINEAR = """
[dynamics]
n = 1
m = 1
f = "0"
g1 = "x1"

[input]
breakpoints = 0, 0.5, 1
table.1 = 0: 0; 0.5: 0
table.2 = 0.5: 1; 1: 1
control_set = box
lower = 0
upper = 1

[initial]
x = 1

[solver]
step = 1e-4
support = 0.1

[sweep]
ks = 32, 128, 512
taus = 0.25, 0.5, 0.75, 1
"""


def _with_bridge(text: str, bridge: str) -> str:
    if bridge not in _BRIDGES:
        raise ConfigurationError(f"Unknown bridge '{bridge}', expected one of {sorted(_BRIDGES)}")
    if _BRIDGES[bridge] is None:
        return text
    return text + f"\n[bridges]\nminus.2 = {_BRIDGES[bridge]}\n"


def ex21(k: float = None) -> Scenario:
    """
    Load the six-dimensional non-commutative example with the oscillating input family u_k.

    :k (float, default = None): Fix the family parameter. Without it the scenario is a family sweep.
    :returns (Scenario): The scenario.
    """
    text = _EX21 if k is None else _EX21 + f"\n[params]\nk = {k}\n"
    return parse_scenario(text, 'ex21')


def step_noncomm(bridge: str = 'diagonal') -> Scenario:
    """
    Load the jump (0, 0) -> (1, 1) for g1 = d/dx1 and g2 = x1 d/dx2, whose bracket does not vanish.

    :bridge (str, default = 'diagonal'): 'u1_first', 'u2_first' or 'diagonal'.
    :returns (Scenario): The scenario.
    """
    text = _STEP_2D.format(g1 = '"1", "0"', g2 = '"0", "x1"', x0 = '0, 0')
    return parse_scenario(_with_bridge(text, bridge), 'step_noncomm')


def step_comm(bridge: str = 'diagonal') -> Scenario:
    """
    Load the same jump for the commuting diagonal fields g1 = x1 d/dx1 and g2 = x2 d/dx2.

    :bridge (str, default = 'diagonal'): 'u1_first', 'u2_first' or 'diagonal'.
    :returns (Scenario): The scenario.
    """
    text = _STEP_2D.format(g1 = '"x1", "0"', g2 = '"0", "x2"', x0 = '1, 1')
    return parse_scenario(_with_bridge(text, bridge), 'step_comm')


def ac_loop() -> Scenario:
    """Load an absolutely continuous loop input for the non-commuting pair of fields."""
    return parse_scenario(_AC_LOOP, 'ac_loop')


def step_linear() -> Scenario:
    """Load the scalar unit step with g(x) = x, whose solution is x(t) = exp(u(t))."""
    return parse_scenario(_STEP_LINEAR, 'step_linear')


BUILTINS: base.Dict[str, base.Callable] = {
    'ex21': ex21,
    'step_noncomm': step_noncomm,
    'step_comm': step_comm,
    'ac_loop': ac_loop,
    'step_linear': step_linear,
}
