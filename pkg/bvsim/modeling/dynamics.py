import numpy as np
from functools import cached_property
from bvsim import base
from bvsim.base import ConfigurationError
from bvsim.modeling import expr as ex


class VectorField(object):
    """A vector field given by one expression per state component."""

    def __init__(self, components: base.List[ex.Expr], name: str = 'field') -> None:
        """
        Initialise the field.

        :components (base.List[ex.Expr]): One tree per state component.
        :name (str, default = 'field'): Name used in diagnostics, e.g. 'g1'.
        """
        self.components = list(components)
        self.name = name
        self.n = len(self.components)
        self._scalar = ex.compile_exprs(self.components, 'math')

    @classmethod
    def parse(cls, sources: base.List[str], dims: dict, name: str = 'field') -> 'VectorField':
        return cls([ex.parse(s, dims) for s in sources], name)

    def __call__(self, t: float, x: base.VectorType, u: base.VectorType = (), v: base.VectorType = (),
                 k: float = 0.0) -> base.ArrayType:
        return np.array(self._scalar(t, x, u, v, k), dtype = float)

    def jacobian(self, wrt: str = 'x', size: int = None) -> base.List[base.List[ex.Expr]]:
        """
        Symbolic Jacobian, entry [i][j] = d component_i / d wrt_(j+1).

        :wrt (str, default = 'x'): Variable family.
        :size (int, default = None): Number of variables, defaults to the number of components.
        :returns (base.List[base.List[ex.Expr]]): Matrix of trees.
        """
        size = self.n if size is None else size
        return [[ex.differentiate(e, f"{wrt}{j + 1}") for j in range(size)] for e in self.components]

    @cached_property
    def _jacobian(self) -> base.Callable:
        return ex.compile_exprs([d for row in self.jacobian() for d in row], 'math')

    def jacobian_at(self, x: base.VectorType) -> base.ArrayType:
        """Numeric value of the symbolic x-Jacobian at x, shape (n, n)."""
        return np.array(self._jacobian(0.0, x, (), (), 0.0), dtype = float).reshape(self.n, self.n)

    def serialize(self) -> base.List[str]:
        return [ex.serialize(e) for e in self.components]

    def __repr__(self) -> str:
        return f"VectorField({self.name}: {self.serialize()})"


class Dynamics(object):
    """The impulsive system x' = f(t, x, u, v) + sum_alpha g_alpha(x) u_alpha'."""

    def __init__(self, n: int, m: int, l: int, f: VectorField, g: base.List[VectorField],
                 guard: float = base.DEFAULT_GUARD, k: float = 0.0) -> None:
        """
        Initialise and validate the dynamics.

        :n (int): State dimension.
        :m (int): Dimension of the impulsive control u.
        :l (int): Dimension of the ordinary control v.
        :f (VectorField): Drift over (t, x, u, v).
        :g (base.List[VectorField]): The m input fields, over x only.
        :guard (float, default = base.DEFAULT_GUARD): Abort threshold on |x|.
        :k (float, default = 0.0): Value of the family parameter, if any expression uses it.
        """
        if n < 1 or m < 1 or l < 0:
            raise ConfigurationError(f"Invalid dimensions n={n}, m={m}, l={l}")
        if f.n != n:
            raise ConfigurationError(f"f has {f.n} components, expected n={n}")
        if len(g) != m:
            raise ConfigurationError(f"Expected m={m} input fields, got {len(g)}")
        for field in g:
            if field.n != n:
                raise ConfigurationError(f"{field.name} has {field.n} components, expected n={n}")
            for e in field.components:
                extra = {v for v in ex.variables(e) if v[0] != 'x'}
                if extra:
                    raise ConfigurationError(f"{field.name} may only depend on x, found {sorted(extra)}")
        self.n, self.m, self.l = n, m, l
        self.f, self.g = f, list(g)
        self.guard = guard
        self.k = float(k)
        columns = [e for field in self.g for e in field.components]
        self._g_flat = ex.compile_exprs(columns, 'math')

    @classmethod
    def from_sources(cls, n: int, m: int, l: int, f: base.List[str], g: base.List[base.List[str]],
                     guard: float = base.DEFAULT_GUARD, k: float = 0.0) -> 'Dynamics':
        """
        Parse the fields from expression sources.

        :f (base.List[str]): n drift expressions.
        :g (base.List[base.List[str]]): m lists of n expressions.
        :returns (Dynamics): The dynamics.
        """
        dims = {'x': n, 'u': m, 'v': l}
        drift = VectorField.parse(f, dims, 'f')
        fields = [VectorField.parse(col, dims, f"g{i + 1}") for i, col in enumerate(g)]
        return cls(n, m, l, drift, fields, guard, k)

    def drift(self, t: float, x: base.VectorType, u: base.VectorType, v: base.VectorType) -> base.ArrayType:
        return self.f(t, x, u, v, self.k)

    def input_matrix(self, x: base.VectorType) -> base.ArrayType:
        """G(x) with column alpha equal to g_alpha(x), shape (n, m)."""
        flat = np.array(self._g_flat(0.0, x, (), (), self.k), dtype = float)
        return flat.reshape(self.m, self.n).T

    def with_k(self, k: float) -> 'Dynamics':
        return Dynamics(self.n, self.m, self.l, self.f, self.g, self.guard, k)

    def __repr__(self) -> str:
        return f"Dynamics(n={self.n}, m={self.m}, l={self.l})"
