"""Batch runner: ``horoflow {verify,assumption,spectrum,mourre,report} --config run.ini``."""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import platform
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, calculus, flows, planar_toy, spectral, surface
from .fields import ScalarField
from .verify import Check, default_suites

CONFIG_VERSION = 1
F_KINDS = ("constant", "poincare", "planar_bump")
PHI_KINDS = ("constant", "poincare", "packet")
WINDOWS = ("hann", "none")


class ConfigError(ValueError):
    pass


class UnsupportedBackendError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    params: tuple = ()

    def get(self, key: str, default: float) -> float:
        return dict(self.params).get(key, default)


def _num(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: backend, time change f, observable phi, sampling sizes and tolerances."""

    seed: int
    backend: str = "planar"
    orientation: str = "negative"
    f: FieldSpec = FieldSpec("constant", (("value", 1.0),))
    phi: FieldSpec = FieldSpec("packet", ())
    T: float = 200.0
    dt: float = 0.05
    n_samples: int = 10_000
    window: str = "hann"
    proposal_scale: float = 0.8
    flow_tol: float = 1e-10
    correlation_tol: float = 1e-8
    fd_step: float = 1e-2
    assumption_n: int = 1000
    intervals: tuple = planar_toy.MOURRE_INTERVALS
    output: str = "runs"
    generators: str = ""
    threads: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.backend not in ("bolza", "planar"):
            raise ConfigError(f"backend must be bolza or planar, got {self.backend!r}")
        if self.orientation not in flows.ORIENTATIONS:
            raise ConfigError(f"orientation must be one of {flows.ORIENTATIONS}")
        if self.f.kind not in F_KINDS or self.phi.kind not in PHI_KINDS:
            raise ConfigError(f"unknown field kind in f={self.f.kind!r}, phi={self.phi.kind!r}")
        if self.backend == "planar" and "poincare" in (self.f.kind, self.phi.kind):
            raise ConfigError("poincare fields live on the bolza backend")
        if self.backend == "bolza" and (self.f.kind == "planar_bump" or self.phi.kind == "packet"):
            raise ConfigError("planar fields need the planar backend")
        lo, hi = flows.TOL_RANGE
        for name in ("flow_tol", "correlation_tol"):
            if not lo <= getattr(self, name) <= hi:
                raise ConfigError(f"{name} must lie in [{lo}, {hi}]")
        lo, hi = calculus.STEP_RANGE
        if not lo <= self.fd_step <= hi:
            raise ConfigError(f"fd_step must lie in [{lo}, {hi}]")
        if self.window not in WINDOWS:
            raise ConfigError(f"window must be one of {WINDOWS}")
        if self.T <= 0 or self.dt <= 0 or self.T / self.dt > spectral.MAX_LAGS:
            raise ConfigError("need T > 0, dt > 0 and T/dt <= 1e6")
        if self.n_samples < 1000 or self.assumption_n < 1000:
            raise ConfigError("n_samples and assumption n must be >= 1000")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for a, b in self.intervals:
            if not 0 < a < b:
                raise ConfigError(f"bad interval [{a}, {b}]")
        return self

    # --- text form ---------------------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["meta"] = {"version": str(CONFIG_VERSION)}
        cp["run"] = {
            "backend": self.backend,
            "orientation": self.orientation,
            "seed": str(self.seed),
            "threads": str(self.threads),
            "output": self.output,
            "generators": self.generators,
        }
        for sec, spec in (("f", self.f), ("phi", self.phi)):
            cp[sec] = {"kind": spec.kind, **{k: _fmt(v) for k, v in spec.params}}
        cp["spectrum"] = {
            "T": _fmt(self.T),
            "dt": _fmt(self.dt),
            "n_samples": str(self.n_samples),
            "window": self.window,
            "proposal_scale": _fmt(self.proposal_scale),
        }
        cp["tolerances"] = {
            "flow": _fmt(self.flow_tol),
            "correlation": _fmt(self.correlation_tol),
            "fd_step": _fmt(self.fd_step),
        }
        cp["assumption"] = {"n": str(self.assumption_n)}
        cp["mourre"] = {"intervals": ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in self.intervals)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string(text)
        if cp.get("meta", "version", fallback=None) != str(CONFIG_VERSION):
            raise ConfigError(f"config needs [meta] version = {CONFIG_VERSION}")
        if not cp.has_option("run", "seed"):
            raise ConfigError("seed is mandatory")
        try:
            run = cp["run"]

            def spec(sec, default):
                if not cp.has_section(sec):
                    return default
                items = {k: v for k, v in cp[sec].items()}
                kind = items.pop("kind", default.kind)
                return FieldSpec(kind, tuple((k, float(v)) for k, v in items.items()))

            sp = cp["spectrum"] if cp.has_section("spectrum") else {}
            tol = cp["tolerances"] if cp.has_section("tolerances") else {}
            d = cls(seed=0)
            intervals = d.intervals
            if cp.has_option("mourre", "intervals"):
                intervals = tuple(
                    tuple(float(x) for x in item.split(":")) for item in cp["mourre"]["intervals"].split(",")
                )
            cfg = cls(
                seed=int(run["seed"]),
                backend=run.get("backend", d.backend),
                orientation=run.get("orientation", d.orientation),
                threads=int(run.get("threads", d.threads)),
                output=run.get("output", d.output),
                generators=run.get("generators", d.generators),
                f=spec("f", d.f),
                phi=spec("phi", d.phi),
                T=float(sp.get("T", d.T)),
                dt=float(sp.get("dt", d.dt)),
                n_samples=int(sp.get("n_samples", d.n_samples)),
                window=sp.get("window", d.window),
                proposal_scale=float(sp.get("proposal_scale", d.proposal_scale)),
                flow_tol=float(tol.get("flow", d.flow_tol)),
                correlation_tol=float(tol.get("correlation", d.correlation_tol)),
                fd_step=float(tol.get("fd_step", d.fd_step)),
                assumption_n=int(cp.get("assumption", "n", fallback=d.assumption_n)),
                intervals=intervals,
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @property
    def config_hash(self) -> str:
        """Hash of everything that can change the numbers (threads and output location excluded)."""
        canonical = replace(self, threads=1, output="").to_text()
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# --- building objects from a config ---------------------------------------------------


def _group(cfg: ExperimentConfig) -> surface.FuchsianGroup:
    if cfg.generators:
        return surface.FuchsianGroup.load(cfg.generators)
    return surface.build_bolza()


def build_backend(cfg: ExperimentConfig) -> flows.FlowBackend:
    if cfg.backend == "bolza":
        return flows.make_backend("bolza", cfg.orientation, _group(cfg))
    return flows.make_backend("planar", cfg.orientation)


def build_field(spec: FieldSpec, backend: flows.FlowBackend, role: str) -> ScalarField:
    if spec.kind == "constant":
        return ScalarField.constant(spec.get("value", 1.0), state_ndim=len(backend.state_shape))
    if spec.kind == "poincare":
        u = surface.periodic_function(spec.get("beta", 2.0), spec.get("radius", 1.0), group=backend.group)
        if role == "f":
            out = 1.0 + spec.get("epsilon", 0.2) * u
            eps, beta, radius = (spec.get(k, d) for k, d in (("epsilon", 0.2), ("beta", 2.0), ("radius", 1.0)))
            return replace(out, label=f"poincare({eps!r},{beta!r},{radius!r})")
        return u
    if spec.kind == "planar_bump":
        return planar_toy.planar_bump(spec.get("a", 0.5), spec.get("width", 1.0))
    return planar_toy.gaussian_packet(
        (spec.get("center_x", 0.0), spec.get("center_y", 0.0)),
        (spec.get("width_x", 1.0), spec.get("width_y", 1.0)),
        spec.get("wavenumber", 0.0),
    )


# --- manifest -------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    versions: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    table: list = field(default_factory=list)
    exit_code: int = 0

    @classmethod
    def start(cls, command: str, cfg: ExperimentConfig) -> "RunManifest":
        versions = {
            "horoflow": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        }
        return cls(command, cfg.config_hash, cfg.seed, versions)

    def add_file(self, path: Path) -> None:
        self.files[path.name] = _sha256(path)

    def write(self, out: Path) -> Path:
        path = out / f"{self.command}_manifest.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True, default=str) + "\n")
        return path


def _table(rows: list[dict], cols: list[str]) -> str:
    widths = [max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in cols]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    for r in rows:
        lines.append("  ".join(str(r.get(c, "")).ljust(w) for c, w in zip(cols, widths)))
    return "\n".join(lines)


# --- commands -------------------------------------------------------------------------


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    man = RunManifest.start("verify", cfg)
    t0 = time.perf_counter()
    try:
        group = _group(cfg)
        checks = default_suites(group, cfg.seed)
    except surface.GroupConstructionError as exc:
        checks = [Check("surface", f"build_bolza relation: {exc}", float("inf"), 1e-10)]
    man.timings["total_s"] = time.perf_counter() - t0
    man.table = [c.to_dict() for c in checks]
    rows = [
        {"suite": c.suite, "invariant": c.name, "measured": f"{c.measured:.3e}", "tol": f"{c.tolerance:.0e}",
         "result": "pass" if c.passed else "FAIL"}
        for c in checks
    ]
    print(_table(rows, ["suite", "invariant", "measured", "tol", "result"]))
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("failing invariants: " + "; ".join(failed), file=sys.stderr)
    man.exit_code = 1 if failed else 0
    man.write(out)
    return man.exit_code


def cmd_assumption(cfg: ExperimentConfig, out: Path) -> int:
    man = RunManifest.start("assumption", cfg)
    backend = build_backend(cfg)
    f = build_field(cfg.f, backend, "f")
    t0 = time.perf_counter()
    rep = calculus.check_assumption(backend, f, cfg.assumption_n, cfg.seed, cfg.fd_step)
    man.timings["total_s"] = time.perf_counter() - t0
    path = out / "assumption.txt"
    path.write_text(rep.to_text())
    man.add_file(path)
    man.table = [{"f": rep.f_label, "delta_f": rep.delta_f, "delta_g": rep.delta_g, "passed": rep.passed}]
    print(rep.to_text(), end="")
    print("verdict:", "pass" if rep.passed else "fail")
    man.exit_code = 0 if rep.passed else 1
    man.write(out)
    return man.exit_code


def cmd_spectrum(cfg: ExperimentConfig, out: Path) -> int:
    man = RunManifest.start("spectrum", cfg)
    backend = build_backend(cfg)
    f = build_field(cfg.f, backend, "f")
    phi = build_field(cfg.phi, backend, "phi")
    t0 = time.perf_counter()
    tc = calculus.make_time_change(backend, f, cfg.assumption_n, cfg.seed, cfg.fd_step)
    proposal = None
    if backend.kind == "planar":
        center = (cfg.phi.get("center_x", 0.0), cfg.phi.get("center_y", 0.0))
        proposal = spectral.GaussianProposal(center, cfg.proposal_scale)
    series = spectral.correlation(
        backend, phi, tc, cfg.T, cfg.dt, cfg.n_samples, cfg.seed, cfg.correlation_tol, proposal, cfg.threads
    )
    man.timings["correlation_s"] = time.perf_counter() - t0
    scan = spectral.atom_scan(series)
    dens = spectral.density(series, cfg.window)
    decay = spectral.decay_report(series)
    corr_path, dens_path = out / "correlation.csv", out / "density.csv"
    series.to_csv(corr_path)
    dens.to_csv(dens_path)
    summary = {
        "config_hash": cfg.config_hash,
        "series": series.metadata(),
        "density": dens.metadata(),
        "atom_scan": scan.to_dict(),
        "decay": decay,
        "assumption": tc.report.to_dict() if tc.report else {},
    }
    if backend.kind == "planar":
        exact = planar_toy.exact_spectrum(phi, f, representation="tilde")
        exact_path = out / "exact_density.csv"
        exact.to_csv(exact_path)
        man.add_file(exact_path)
        summary["oracle_l1"] = dens.l1_distance(exact)
    spectral.write_sidecar(out / "spectrum.json", summary)
    for p in (corr_path, dens_path, out / "spectrum.json"):
        man.add_file(p)
    man.timings["total_s"] = time.perf_counter() - t0
    man.table = [{"atom_scan": scan.values, "extrapolated": scan.extrapolated, "noise_floor": scan.noise_floor,
                  "decreasing": scan.decreasing, "oracle_l1": summary.get("oracle_l1")}]
    print(f"C(0) = {series.c0.real:.6g}   atom scan {['%.3e' % v for v in scan.values]}  decreasing={scan.decreasing}")
    print(f"noise floor {scan.noise_floor:.3e}   extrapolated atom mass {scan.extrapolated:.3e}")
    print(f"density integral {dens.integral:.6g}   deficit {dens.negativity_deficit:.3e} (bound {dens.deficit_bound:.3e})")
    print(f"decay: {decay}")
    if "oracle_l1" in summary:
        print(f"L1 distance to exact spectrum: {summary['oracle_l1']:.4f}")
    man.write(out)
    return 0


def cmd_mourre(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.backend != "planar":
        raise UnsupportedBackendError("the Mourre check runs on the planar backend only")
    man = RunManifest.start("mourre", cfg)
    backend = build_backend(cfg)
    f = build_field(cfg.f, backend, "f")
    phi = build_field(cfg.phi, backend, "phi")
    tc = calculus.make_time_change(backend, f, cfg.assumption_n, cfg.seed, cfg.fd_step)
    reports = [planar_toy.mourre_check(J, phi, tc).to_dict() for J in cfg.intervals]
    path = out / "mourre.json"
    spectral.write_sidecar(path, {"config_hash": cfg.config_hash, "delta_g": tc.delta_g, "intervals": reports})
    man.add_file(path)
    man.table = reports
    rows = [{"J": r["interval"], "q": f"{r['q']:.6g}", "a|phi_J|^2": f"{r['a'] * r['norm_sq']:.6g}",
             "slack": f"{r['slack']:.6g}", "result": "pass" if r["passed"] else "FAIL"} for r in reports]
    print(_table(rows, ["J", "q", "a|phi_J|^2", "slack", "result"]))
    man.exit_code = 0 if all(r["passed"] for r in reports) else 1
    man.write(out)
    return man.exit_code


def cmd_report(cfg: ExperimentConfig, out: Path) -> int:
    """Collect every manifest in the output directory into report.md."""
    lines = [f"# horoflow report ({cfg.config_hash})", ""]
    for path in sorted(out.glob("*_manifest.json")):
        man = json.loads(path.read_text())
        lines.append(f"## {man['command']} (exit {man['exit_code']})")
        for row in man["table"]:
            lines.append("- " + ", ".join(f"{k}={row[k]}" for k in sorted(row)))
        lines.append("")
    text = "\n".join(lines)
    (out / "report.md").write_text(text)
    print(text)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "assumption": cmd_assumption,
    "spectrum": cmd_spectrum,
    "mourre": cmd_mourre,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="horoflow", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, required=True)
    parser.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if args.out is not None:
            overrides["output"] = str(args.out)
        cfg = replace(cfg, **overrides).validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, out)
    except UnsupportedBackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
