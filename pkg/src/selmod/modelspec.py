"""Model specification: family, link, mechanism, and data-column bindings.

A spec file is a flat key = value text document, one field per line, with
``#`` comments.  List-valued fields are comma separated.  Example::

    family        = poisson
    link          = log
    mechanism     = probit-std
    response_col  = reports
    selection_col = accepted
    x_cols        = age, income
    w_cols        = age, income, ownrent
    ci_level      = 0.95

``x_intercept`` / ``w_intercept`` default to true; ``truncation_K``,
``kappa``, and ``grid`` (an explicit alpha grid) are optional.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from . import families as fam
from . import mechanisms as mech_mod
from .errors import SchemaError

_FAMILY_BUILDERS = {
    "bernoulli": fam.bernoulli,
    "poisson": lambda link=None: fam.poisson(),
    "negbin": None,  # needs kappa, handled specially
    "normal": lambda link=None: fam.normal(),
}

_DEFAULT_LINKS = {
    "bernoulli": fam.LOGIT,
    "poisson": fam.LOG,
    "negbin": fam.LOG,
    "normal": fam.IDENTITY,
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    mechanism: str
    link: str | None = None
    response_col: str | None = None
    selection_col: str | None = None
    x_cols: tuple[str, ...] = ()
    w_cols: tuple[str, ...] = ()
    x_intercept: bool = True
    w_intercept: bool = True
    truncation_K: int | None = None
    ci_level: float = 0.95
    kappa: float | None = None
    grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in _FAMILY_BUILDERS:
            raise SchemaError(f"unknown family {self.family!r}")
        if self.mechanism not in mech_mod.MECHANISM_KEYS:
            raise SchemaError(f"unknown mechanism {self.mechanism!r}")
        if self.family == "negbin" and (self.kappa is None or not self.kappa > 0):
            raise SchemaError("family negbin requires a positive kappa")
        if not 0.0 < self.ci_level < 1.0:
            raise SchemaError("ci_level must lie in (0, 1)")
        if self.truncation_K is not None and self.truncation_K < 1:
            raise SchemaError("truncation_K must be a positive integer")
        # mgf mechanism needs a nonnegative response; standardized ones need mu > 0
        _, h_kind = mech_mod.MECHANISM_KEYS[self.mechanism]
        if h_kind in (mech_mod.MGFLINEAR, mech_mod.STANDARDIZED, mech_mod.EXPSTANDARDIZED):
            if not self.response_family().nonnegative_support:
                raise SchemaError(
                    f"mechanism {self.mechanism!r} requires a nonnegative-support family"
                )
        reserved = {self.response_col, self.selection_col} - {None}
        if reserved & set(self.x_cols) or reserved & set(self.w_cols):
            raise SchemaError(
                "covariate columns must be disjoint from the response/selection columns"
            )
        object.__setattr__(self, "x_cols", tuple(self.x_cols))
        object.__setattr__(self, "w_cols", tuple(self.w_cols))
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(float(a) for a in self.grid))
        # validates the family/link pairing eagerly
        self.response_family()

    def response_family(self) -> fam.ResponseFamily:
        link = self.link or _DEFAULT_LINKS[self.family]
        if self.family == "negbin":
            f = fam.negbin(self.kappa)
        elif self.family == "bernoulli":
            f = fam.bernoulli(link)
        elif self.family == "poisson":
            f = fam.poisson()
        else:
            f = fam.normal()
        if f.link != link:
            raise SchemaError(f"link {link!r} is not supported for {self.family}")
        return f

    def mechanism_at(self, alpha: float) -> mech_mod.SelectionMechanism:
        return mech_mod.mechanism(self.mechanism, alpha)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


_LIST_FIELDS = {"x_cols", "w_cols"}
_FLOAT_LIST_FIELDS = {"grid"}
_BOOL_FIELDS = {"x_intercept", "w_intercept"}
_INT_FIELDS = {"truncation_K"}
_FLOAT_FIELDS = {"ci_level", "kappa"}


def parse_key_values(text: str) -> dict[str, str]:
    """Parse a flat key = value document into raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise SchemaError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _parse_bool(key, value):
    low = value.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise SchemaError(f"field {key!r} must be boolean, got {value!r}")


def parse_model_spec(text: str) -> ModelSpec:
    raw = parse_key_values(text)
    known = {f.name for f in fields(ModelSpec)}
    unknown = set(raw) - known
    if unknown:
        raise SchemaError(f"unknown spec fields: {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        try:
            if key in _LIST_FIELDS:
                kwargs[key] = tuple(s.strip() for s in value.split(",") if s.strip())
            elif key in _FLOAT_LIST_FIELDS:
                kwargs[key] = tuple(float(s) for s in value.split(",") if s.strip())
            elif key in _BOOL_FIELDS:
                kwargs[key] = _parse_bool(key, value)
            elif key in _INT_FIELDS:
                kwargs[key] = int(value)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError as exc:
            raise SchemaError(f"field {key!r}: {exc}") from None
    for required in ("family", "mechanism"):
        if required not in kwargs:
            raise SchemaError(f"spec is missing the required field {required!r}")
    return ModelSpec(**kwargs)


def load_model_spec(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_spec(fh.read())
