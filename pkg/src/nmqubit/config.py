"""Run configuration: YAML documents, presets and command-line overrides.

A document has the sections ``reservoir``, ``coefficients``,
``integrator``, ``control``, ``scan`` and ``acceptance`` plus the
top-level keys ``preset``, ``mode``, ``policy``, ``ensemble_size``,
``output_dir`` and ``initial_state``. Every key is optional; unknown keys
are rejected. See ``docs/configuration.rst`` for the full schema.
"""
import logging
import math

import traitlets
import yaml

from .control import OCConfig
from .ensemble import AcceptanceCriteria
from .exceptions import ConfigError, ConfigParseError, ValidationError
from .kernels import QuadratureOptions, ReservoirParams
from .policies import POLICY_NAMES
from .presets import PRESETS
from .qubit import NUMERICAL_SLACK, ModeFlag
from .sde import DEFAULT_INITIAL_STATE, IntegratorConfig

logger = logging.getLogger(__name__)


class CoefficientConfig(QuadratureOptions):
    """Quadrature options plus the spacing of the coefficient grid."""

    dt = traitlets.Float(0.01)

    @traitlets.validate("dt")
    def _positive_dt(self, proposal):
        if not proposal["value"] > 0:
            raise traitlets.TraitError("dt must be positive.")
        return proposal["value"]


class ScanConfig(traitlets.HasTraits):
    """Temperatures of the control-free scan."""

    kBT_values = traitlets.List(
        traitlets.Float(min=0.0), default_value=[0.0, 1.0, 2.0, 5.0, 10.0]
    )

    @traitlets.validate("kBT_values")
    def _nonempty(self, proposal):
        if not proposal["value"]:
            raise traitlets.TraitError("at least one temperature is needed.")
        return proposal["value"]


SECTIONS = {
    "reservoir": ReservoirParams,
    "coefficients": CoefficientConfig,
    "integrator": IntegratorConfig,
    "control": OCConfig,
    "scan": ScanConfig,
    "acceptance": AcceptanceCriteria,
}

TOP_LEVEL = (
    "preset",
    "mode",
    "policy",
    "ensemble_size",
    "output_dir",
    "initial_state",
)


class RunConfig(traitlets.HasTraits):
    """Fully validated configuration of one command.

    Args
    ----
        reservoir : ReservoirParams
        coefficients : CoefficientConfig
        integrator : IntegratorConfig
        control : OCConfig
        scan : ScanConfig
        acceptance : AcceptanceCriteria
        initial_state : tuple
                Bloch vector (x0, y0, z0) inside the unit ball.
        mode : str
                ``"nonmarkovian"`` or ``"markovian"``.
        policy : str
                Control applied by ``simulate`` and ``ensemble``: one of
                ``"feedback"``, ``"open_loop"`` or ``"none"``.
        ensemble_size : int
        output_dir : str
        preset : str or None
    """

    reservoir = traitlets.Instance(ReservoirParams, args=())
    coefficients = traitlets.Instance(CoefficientConfig, args=())
    integrator = traitlets.Instance(IntegratorConfig, args=())
    control = traitlets.Instance(OCConfig, args=())
    scan = traitlets.Instance(ScanConfig, args=())
    acceptance = traitlets.Instance(AcceptanceCriteria, args=())
    initial_state = traitlets.Tuple(
        traitlets.Float(),
        traitlets.Float(),
        traitlets.Float(),
        default_value=DEFAULT_INITIAL_STATE,
    )
    mode = traitlets.Enum(
        [m.value for m in ModeFlag], default_value=ModeFlag.NON_MARKOVIAN.value
    )
    policy = traitlets.Enum(POLICY_NAMES, default_value="feedback")
    ensemble_size = traitlets.Integer(500, min=1)
    output_dir = traitlets.Unicode("results")
    preset = traitlets.Enum(
        sorted(PRESETS), default_value=None, allow_none=True
    )

    @traitlets.validate("initial_state")
    def _inside_ball(self, proposal):
        x, y, z = proposal["value"]
        if not all(math.isfinite(v) for v in (x, y, z)):
            raise traitlets.TraitError("initial_state must be finite.")
        if x * x + y * y + z * z > 1 + NUMERICAL_SLACK:
            raise traitlets.TraitError(
                "initial_state {} lies outside the Bloch ball "
                "(x0^2 + y0^2 + z0^2 > 1).".format((x, y, z))
            )
        return proposal["value"]

    @property
    def mode_flag(self):
        return ModeFlag.parse(self.mode)

    def to_dict(self):
        out = {"preset": self.preset}
        for section in SECTIONS:
            block = getattr(self, section)
            out[section] = {
                name: _plain(getattr(block, name))
                for name in sorted(block.trait_names())
            }
        out["mode"] = self.mode
        out["policy"] = self.policy
        out["ensemble_size"] = self.ensemble_size
        out["output_dir"] = self.output_dir
        out["initial_state"] = [float(v) for v in self.initial_state]
        return out

    def to_yaml(self):
        """The resolved configuration as a YAML document."""
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _coerce(trait, value):
    # YAML 1.1 reads "1e-3" (no dot) as a string
    if isinstance(trait, traitlets.Float) and isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(trait, traitlets.List) and isinstance(value, list):
        return [_coerce(trait._trait, v) for v in value]
    return value


def _build_block(section, values):
    cls = SECTIONS[section]
    block = cls()
    traits = block.traits()
    for key, value in values.items():
        if key not in traits:
            raise ConfigError(
                "{}.{}".format(section, key), "unknown configuration key."
            )
        try:
            setattr(block, key, _coerce(traits[key], value))
        except traitlets.TraitError as exc:
            raise ConfigError("{}.{}".format(section, key), str(exc))
    return block


def _reservoir_values(document, preset):
    values = dict(document.get("reservoir") or {})
    overrides = dict(preset.get("reservoir", {}))
    if "r" in overrides:
        values.pop("omega_c", None)
    if "omega_c" in overrides:
        values.pop("r", None)
    values.update(overrides)
    if "r" in values:
        if "omega_c" in values:
            raise ConfigError(
                "reservoir.r", "give either r or omega_c, not both."
            )
        ratio = values.pop("r")
        try:
            ratio = float(ratio)
        except (TypeError, ValueError):
            raise ConfigError("reservoir.r", "r must be a number.")
        if not ratio > 0:
            raise ConfigError("reservoir.r", "r must be positive.")
        omega0 = values.get("omega0", ReservoirParams().omega0)
        values["omega_c"] = ratio * float(omega0)
    return values


def _load_document(text):
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is None:
            raise ConfigParseError(problem)
        raise ConfigParseError(problem, mark.line + 1, mark.column + 1)
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigParseError(
            "the configuration document must be a mapping, not {}.".format(
                type(document).__name__
            )
        )
    for key, value in document.items():
        if key not in SECTIONS and key not in TOP_LEVEL:
            raise ConfigError(str(key), "unknown configuration key.")
        if key in SECTIONS and not isinstance(value, (dict, type(None))):
            raise ConfigError(key, "a section must be a mapping.")
    return document


def parse_config(text, overrides=None):
    """Parse and validate a configuration document.

    Args
    ----
        text : str
                YAML document; an empty document selects every default.
        overrides : dict, optional
                Command-line overrides with the keys ``preset``, ``seed``,
                ``out``, ``trajectories`` and ``mode``; ``None`` values are
                ignored.

    Returns
    -------
        RunConfig

    Raises
    ------
        ConfigParseError
                The document is not valid YAML.
        ConfigError
                A key is unknown or a value violates its constraints.
    """
    document = _load_document(text)
    overrides = {
        k: v for k, v in (overrides or {}).items() if v is not None
    }
    preset_name = overrides.get("preset", document.get("preset"))
    if preset_name is not None and preset_name not in PRESETS:
        raise ConfigError(
            "preset",
            "unknown preset {!r}; choose from {}.".format(
                preset_name, sorted(PRESETS)
            ),
        )
    preset = PRESETS.get(preset_name, {})

    blocks = {}
    for section in SECTIONS:
        if section == "reservoir":
            values = _reservoir_values(document, preset)
        else:
            values = dict(document.get(section) or {})
            values.update(preset.get(section, {}))
        if section == "integrator" and "seed" in overrides:
            values["master_seed"] = overrides["seed"]
        blocks[section] = _build_block(section, values)

    cfg = RunConfig(**blocks)
    top = {k: document[k] for k in TOP_LEVEL if k in document}
    top["preset"] = preset_name
    if "mode" in overrides:
        top["mode"] = overrides["mode"]
    if "trajectories" in overrides:
        top["ensemble_size"] = overrides["trajectories"]
    if "out" in overrides:
        top["output_dir"] = str(overrides["out"])
    for key, value in top.items():
        if key == "mode" and value is not None:
            try:
                value = ModeFlag.parse(value).value
            except ValidationError as exc:
                raise ConfigError("mode", str(exc))
        if key == "initial_state":
            if not isinstance(value, (list, tuple)) or len(value) != 3:
                raise ConfigError(
                    "initial_state", "expected three numbers (x0, y0, z0)."
                )
            try:
                value = tuple(float(v) for v in value)
            except (TypeError, ValueError):
                raise ConfigError("initial_state", "expected numbers.")
        try:
            setattr(cfg, key, value)
        except traitlets.TraitError as exc:
            raise ConfigError(key, str(exc))

    for section in ("integrator", "control"):
        try:
            getattr(cfg, section).check()
        except ValidationError as exc:
            raise ConfigError(section, str(exc))
    logger.debug("resolved configuration (preset %s)", preset_name)
    return cfg


def load_config(path=None, overrides=None):
    """Read and parse a configuration file; ``None`` gives the defaults."""
    text = ""
    if path is not None:
        with open(path, "r") as f:
            text = f.read()
    return parse_config(text, overrides)
