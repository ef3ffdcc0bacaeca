"""Fuzzy logic access control module (FLACM).

Nine context inputs in [0, 1] are fuzzified over triangular partitions, the
five-rule access policy plus its catch-all deny rule is evaluated with
min-AND, and the clipped consequent sets are max-aggregated on a Degree of
Access (DoA) axis and defuzzified by centroid.

The policy is an ordered if/elif chain.  ``infer_doa`` keeps that ordering in
fuzzy form: rule k fires to ``min(activation_k, 1 - max(activation_j, j < k))``
so that a later rule only contributes to the degree that no earlier rule
matched.  At inputs where every referenced variable sits at a term apex this
reduces to the crisp first-match table, which ``crisp_rule_table`` evaluates
directly.
"""
from __future__ import annotations

import configparser
import enum
import itertools
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, OutOfRange, UnknownTerm
from .identity import canonical_pairs, sha256


class Tier(enum.IntEnum):
    """Access tiers ordered from most to least restrictive."""

    DENY = 0
    READ_ONLY = 1
    READ_WRITE = 2
    FULL = 3

    @property
    def label(self) -> str:
        return _TIER_LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "Tier":
        try:
            return _LABEL_TIERS[text.strip().replace("-", "").replace(" ", "").lower()]
        except KeyError:
            raise ConfigInvalid(f"unknown tier {text!r}") from None


_TIER_LABELS = {Tier.DENY: "Deny", Tier.READ_ONLY: "ReadOnly", Tier.READ_WRITE: "ReadWrite", Tier.FULL: "Full"}
_LABEL_TIERS = {v.lower(): k for k, v in _TIER_LABELS.items()}

ALL_PERMISSIONS = frozenset({"read", "write", "execute", "delete"})
PERMISSIONS = {
    Tier.DENY: frozenset(),
    Tier.READ_ONLY: frozenset({"read"}),
    Tier.READ_WRITE: frozenset({"read", "write"}),
    Tier.FULL: ALL_PERMISSIONS,
}


@dataclass(frozen=True)
class Triangle:
    """Triangular membership function with feet ``a``, ``c`` and apex ``b``.

    ``a == b`` or ``b == c`` gives a shoulder that holds 1.0 at the domain edge.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a <= self.b <= self.c or self.a == self.c:
            raise ConfigInvalid(f"bad triangle ({self.a}, {self.b}, {self.c})")

    def __call__(self, x):
        if isinstance(x, (int, float)):
            return self._scalar(float(x))
        x = np.asarray(x, dtype=float)
        if self.b > self.a:
            left = (x - self.a) / (self.b - self.a)
        else:
            left = np.where(x >= self.a, 1.0, 0.0)
        if self.c > self.b:
            right = (self.c - x) / (self.c - self.b)
        else:
            right = np.where(x <= self.c, 1.0, 0.0)
        y = np.clip(np.minimum(left, right), 0.0, 1.0)
        return float(y) if y.ndim == 0 else y

    def _scalar(self, x: float) -> float:
        # same piecewise formula as the array path, without numpy overhead
        if self.b > self.a:
            left = (x - self.a) / (self.b - self.a)
        else:
            left = 1.0 if x >= self.a else 0.0
        if self.c > self.b:
            right = (self.c - x) / (self.c - self.b)
        else:
            right = 1.0 if x <= self.c else 0.0
        return min(1.0, max(0.0, min(left, right)))

    def centroid(self) -> float:
        return (self.a + self.b + self.c) / 3.0


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    terms: tuple  # ((label, Triangle), ...)

    def labels(self) -> list[str]:
        return [label for label, _ in self.terms]

    def term(self, label: str) -> Triangle:
        for name, mf in self.terms:
            if name == label:
                return mf
        raise UnknownTerm(f"{self.name} has no term {label!r}")

    def memberships(self, x: float) -> dict[str, float]:
        _check_unit(self.name, x)
        return {label: mf(x) for label, mf in self.terms}

    def dominant(self, x: float) -> list[str]:
        """Labels sharing the maximal membership at ``x``."""
        mu = self.memberships(x)
        top = max(mu.values())
        return [label for label, m in mu.items() if abs(m - top) <= 1e-12]


def _check_unit(name, x):
    if not 0.0 <= x <= 1.0:
        raise OutOfRange(f"{name}={x!r} outside [0, 1]")


def membership(v: LinguisticVariable, term: str, x: float) -> float:
    _check_unit(v.name, x)
    return v.term(term)(x)


@dataclass(frozen=True)
class FuzzyInput:
    data_sensitivity: float = 0.5
    trust_level: float = 0.5
    user_activity_level: float = 0.5
    patient_condition: float = 0.5
    resource_availability: float = 0.5
    access_priority: float = 0.5
    treatment_urgency: float = 0.5
    compliance_history: float = 0.5
    user_experience_level: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            _check_unit(f.name, getattr(self, f.name))

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


INPUT_NAMES = tuple(f.name for f in fields(FuzzyInput))


@dataclass(frozen=True)
class Rule:
    id: str
    antecedents: tuple  # ((variable, label), ...)
    consequent: Tier

    def describe(self) -> str:
        cond = " and ".join(f"{v} is {t}" for v, t in self.antecedents)
        return f"{self.id}: if {cond} then {self.consequent.label}"


@dataclass(frozen=True)
class RuleActivation:
    rule_id: str
    strength: float
    consequent: Tier


@dataclass(frozen=True)
class AccessDecision:
    doa: float
    tier: Tier
    permissions: frozenset
    fired_rules: tuple  # ((rule_id, activation), ...)
    subject_digest: bytes | None = None

    @property
    def granted(self) -> bool:
        return self.tier != Tier.DENY


@dataclass(frozen=True)
class RuleBase:
    variables: dict
    rules: tuple
    consequents: dict  # Tier -> Triangle on the DoA axis
    thresholds: tuple  # ((upper bound, Tier), ...) ascending
    default_tier: Tier = Tier.DENY
    default_rule_id: str = "ELSE"
    grid_points: int = 1001
    _grid: np.ndarray = field(init=False, repr=False, compare=False)
    _sets: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.grid_points < 3:
            raise ConfigInvalid("grid_points must be >= 3")
        for rule in self.rules:
            for var, label in rule.antecedents:
                if var not in self.variables:
                    raise ConfigInvalid(f"rule {rule.id} references unknown variable {var!r}")
                self.variables[var].term(label)
        for tier in {r.consequent for r in self.rules} | {self.default_tier}:
            if tier not in self.consequents:
                raise ConfigInvalid(f"no consequent set for tier {tier.label}")
        bounds = [b for b, _ in self.thresholds]
        if bounds != sorted(bounds) or not bounds or bounds[-1] < 1.0:
            raise ConfigInvalid("thresholds must ascend and cover 1.0")
        grid = np.linspace(0.0, 1.0, self.grid_points)
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_sets", {t: mf(grid) for t, mf in self.consequents.items()})

    @property
    def referenced_variables(self) -> list[str]:
        seen = []
        for rule in self.rules:
            for var, _ in rule.antecedents:
                if var not in seen:
                    seen.append(var)
        return seen

    def tier_for(self, doa: float) -> Tier:
        for upper, tier in self.thresholds:
            if doa <= upper:
                return tier
        return self.thresholds[-1][1]


_LOW_MED_HIGH = ("Low", "Medium", "High")


def _partition(labels) -> tuple:
    shapes = (Triangle(0.0, 0.0, 0.5), Triangle(0.0, 0.5, 1.0), Triangle(0.5, 1.0, 1.0))
    return tuple(zip(labels, shapes))


def default_rule_base() -> RuleBase:
    variables = {
        "data_sensitivity": LinguisticVariable("data_sensitivity", _partition(_LOW_MED_HIGH)),
        "trust_level": LinguisticVariable("trust_level", _partition(_LOW_MED_HIGH)),
        "user_activity_level": LinguisticVariable(
            "user_activity_level", _partition(("Rare", "Occasional", "Frequent"))
        ),
        "patient_condition": LinguisticVariable(
            "patient_condition", _partition(("Stable", "Moderate", "Critical"))
        ),
        "resource_availability": LinguisticVariable("resource_availability", _partition(_LOW_MED_HIGH)),
        "access_priority": LinguisticVariable("access_priority", _partition(_LOW_MED_HIGH)),
        "treatment_urgency": LinguisticVariable("treatment_urgency", _partition(_LOW_MED_HIGH)),
        "compliance_history": LinguisticVariable(
            "compliance_history",
            (("Poor", Triangle(0.0, 0.0, 1.0)), ("Excellent", Triangle(0.0, 1.0, 1.0))),
        ),
        "user_experience_level": LinguisticVariable("user_experience_level", _partition(_LOW_MED_HIGH)),
    }
    rules = (
        Rule("R1", (("data_sensitivity", "High"), ("trust_level", "Low"), ("patient_condition", "Critical")), Tier.DENY),
        Rule("R2", (("data_sensitivity", "Medium"), ("trust_level", "Medium"), ("patient_condition", "Moderate")), Tier.READ_WRITE),
        Rule("R3", (("data_sensitivity", "Low"), ("trust_level", "High"), ("patient_condition", "Stable")), Tier.FULL),
        Rule("R4", (("user_activity_level", "Frequent"), ("compliance_history", "Excellent")), Tier.FULL),
        Rule("R5", (("user_activity_level", "Occasional"), ("compliance_history", "Poor")), Tier.READ_ONLY),
    )
    consequents = {
        Tier.DENY: Triangle(0.0, 0.0, 0.25),
        Tier.READ_ONLY: Triangle(0.125, 0.375, 0.625),
        Tier.READ_WRITE: Triangle(0.375, 0.625, 0.875),
        Tier.FULL: Triangle(0.75, 1.0, 1.0),
    }
    thresholds = ((0.25, Tier.DENY), (0.5, Tier.READ_ONLY), (0.75, Tier.READ_WRITE), (1.0, Tier.FULL))
    return RuleBase(variables, rules, consequents, thresholds)


DEFAULT_RULE_BASE = default_rule_base()


def evaluate_rules(inp: FuzzyInput, rb: RuleBase = DEFAULT_RULE_BASE) -> list[RuleActivation]:
    """Min-AND activation of every rule, then the catch-all rule."""
    values = inp.as_dict()
    out = []
    for rule in rb.rules:
        strength = min(rb.variables[v].term(t)(values[v]) for v, t in rule.antecedents)
        out.append(RuleActivation(rule.id, strength, rule.consequent))
    top = max((a.strength for a in out), default=0.0)
    out.append(RuleActivation(rb.default_rule_id, max(0.0, 1.0 - top), rb.default_tier))
    return out


def chained_firing(activations: list[RuleActivation]) -> list[float]:
    """Firing strengths under first-match priority.

    The last activation is the catch-all rule; its strength already equals
    ``1 - max(previous)``.
    """
    firing = []
    seen = 0.0
    for act in activations[:-1]:
        firing.append(min(act.strength, 1.0 - seen))
        seen = max(seen, act.strength)
    firing.append(activations[-1].strength)
    return firing


def aggregate(activations: list[RuleActivation], rb: RuleBase = DEFAULT_RULE_BASE) -> np.ndarray:
    agg = np.zeros_like(rb._grid)
    for act, w in zip(activations, chained_firing(activations)):
        if w > 0.0:
            np.maximum(agg, np.minimum(w, rb._sets[act.consequent]), out=agg)
    return agg


def centroid(grid: np.ndarray, mu: np.ndarray) -> float:
    area = np.trapezoid(mu, grid)
    if area <= 0.0:
        return 0.0
    return float(np.clip(np.trapezoid(mu * grid, grid) / area, 0.0, 1.0))


def infer_doa(inp: FuzzyInput, rb: RuleBase = DEFAULT_RULE_BASE, subject_attrs=None) -> AccessDecision:
    """Mamdani inference producing a Degree of Access and its tier.

    ``subject_attrs`` is accepted for provenance only: its digest is stored on
    the decision but no rule reads it.
    """
    activations = evaluate_rules(inp, rb)
    doa = centroid(rb._grid, aggregate(activations, rb))
    tier = rb.tier_for(doa)
    if doa == 0.0:
        tier = Tier.DENY
    fired = tuple((a.rule_id, a.strength) for a in activations if a.strength > 0.0)
    digest = sha256(canonical_pairs(subject_attrs)) if subject_attrs else None
    return AccessDecision(doa, tier, PERMISSIONS[tier], fired, digest)


def _first_match(assignment: dict, rb: RuleBase) -> Tier:
    for rule in rb.rules:
        if all(assignment[v] == t for v, t in rule.antecedents):
            return rule.consequent
    return rb.default_tier


def crisp_rule_table(inp: FuzzyInput, rb: RuleBase = DEFAULT_RULE_BASE) -> Tier:
    """First-match evaluation over each variable's dominant term.

    When a variable has tied dominant terms every combination is evaluated and
    the most restrictive outcome is returned.
    """
    values = inp.as_dict()
    names = rb.referenced_variables
    choices = [rb.variables[n].dominant(values[n]) for n in names]
    return min(_first_match(dict(zip(names, combo)), rb) for combo in itertools.product(*choices))


def corner_inputs(rb: RuleBase = DEFAULT_RULE_BASE, base: FuzzyInput | None = None):
    """Yield every input whose referenced variables sit on a term apex."""
    base = base or FuzzyInput()
    names = rb.referenced_variables
    apexes = []
    for n in names:
        pts = []
        for _, mf in rb.variables[n].terms:
            pts.append(mf.b)
        apexes.append(pts)
    for combo in itertools.product(*apexes):
        values = base.as_dict()
        values.update(zip(names, combo))
        yield FuzzyInput(**values)


# -- config files ---------------------------------------------------------


def _triangle(text: str) -> Triangle:
    try:
        a, b, c = (float(p) for p in text.split(","))
    except ValueError:
        raise ConfigInvalid(f"expected 'a, b, c', got {text!r}") from None
    return Triangle(a, b, c)


def load_rule_base(path) -> RuleBase:
    """Read a rule base from an INI file (schema in ``docs/config.md``)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigInvalid(f"cannot read rule file {path}")
    return rule_base_from_parser(cp)


def rule_base_from_parser(cp: configparser.ConfigParser) -> RuleBase:
    variables, rules, consequents, thresholds = {}, [], {}, []
    for section in cp.sections():
        kind, _, name = section.partition(".")
        body = cp[section]
        if kind == "variable":
            terms = tuple((label, _triangle(body[label])) for label in body)
            variables[name] = LinguisticVariable(name, terms)
        elif kind == "rule":
            ante = []
            for clause in body["if"].split(" and "):
                var, _, label = clause.strip().partition(" is ")
                ante.append((var.strip(), label.strip()))
            rules.append(Rule(name, tuple(ante), Tier.parse(body["then"])))
        elif section == "consequent":
            consequents = {Tier.parse(k): _triangle(v) for k, v in body.items()}
        elif section == "thresholds":
            thresholds = sorted((float(v), Tier.parse(k)) for k, v in body.items())
    missing = [n for n in INPUT_NAMES if n not in variables]
    if missing:
        raise ConfigInvalid(f"rule file lacks variables {missing}")
    inference = cp["inference"] if cp.has_section("inference") else {}
    return RuleBase(
        variables,
        tuple(rules),
        consequents,
        tuple(thresholds),
        default_tier=Tier.parse(inference.get("default", "Deny")),
        grid_points=int(inference.get("grid_points", 1001)),
    )


def dump_rule_base(rb: RuleBase, path) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["inference"] = {"default": rb.default_tier.label, "grid_points": str(rb.grid_points)}
    for name, var in rb.variables.items():
        cp[f"variable.{name}"] = {label: f"{mf.a}, {mf.b}, {mf.c}" for label, mf in var.terms}
    cp["consequent"] = {t.label: f"{mf.a}, {mf.b}, {mf.c}" for t, mf in sorted(rb.consequents.items())}
    cp["thresholds"] = {t.label: str(b) for b, t in rb.thresholds}
    for rule in rb.rules:
        cp[f"rule.{rule.id}"] = {
            "if": " and ".join(f"{v} is {t}" for v, t in rule.antecedents),
            "then": rule.consequent.label,
        }
    with Path(path).open("w") as fh:
        cp.write(fh)
