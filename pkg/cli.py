# =============================================================================
# LINHA DE COMANDO
# =============================================================================
# Comandos: spectrum, dynamics, project, zeno-scan, oracle {ed|rk4|damping},
# validate. Códigos de saída: 0 ok, 1 invariante violado, 2 configuração,
# 3 recursos. Toda execução grava report.json no diretório de saída.

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from charts import NhkpmCharts
from config import Settings
from data_processor import DataProcessor, RunReport
from linalg_core import DimensionError, ResourceError
from model import ModelError, ModelParams, apply_liouvillian
from nhkpm import (DenseBackend, FrequencyGrid, GridError, KernelCheckError, KpmParams, MpsBackend,
                   ScaleViolationError, SpectralMap, candidate_rectangles, chebyshev_moments,
                   estimate_scale, greens_at_zero, kernel_self_test, spectral_map,
                   verify_principal_value_coefficients)
from observables import (TimeSeries, autocorrelator, decay_rate, extract_relaxation_rate,
                         project_map, time_axis)
from oracles import (OracleError, build_damping_matrix, damping_autocorrelator, damping_cross_check,
                     damping_relaxation_rate, damping_spectral_gap, ed_autocorrelator, ed_relaxation_rate,
                     ed_spectrum, rk4_autocorrelator)
from run_config import ConfigError, RunConfig, apply_overrides, load_run_config
from tn import MpoRangeError, boundary_mps
from vectorize import (VectorizationBasis, boundary_states, build_transformed_liouvillian,
                       steady_state_vector, vectorize)
from workers import WorkerPool

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

ORACLES = ("ed", "rk4", "damping")


@dataclass
class RunContext:
    config: RunConfig
    out_dir: Path
    pool: WorkerPool
    report: RunReport

    @property
    def params(self) -> ModelParams:
        return self.config.model.to_params()

    @property
    def basis(self) -> VectorizationBasis:
        return self.config.vectorization.kind

    @property
    def svg(self) -> bool:
        return self.config.output.svg

    def emit(self, name: str) -> Path:
        path = self.out_dir / name
        self.report.files.append(path)
        return path


# =============================================================================
# MONTAGEM DO PIPELINE
# =============================================================================
def log_progress(done: int, total: int):
    """Registra o andamento do pool a cada ~10% das tarefas e ao final."""
    step = max(1, total // 10)
    if done == total or done % step == 0:
        logger.info(f"Progresso: {done}/{total} tarefas ({done / total:.0%})")


def build_backend(config: RunConfig, params: ModelParams):
    terms = build_transformed_liouvillian(params, config.vectorization.kind)
    if config.backend.kind == "mps":
        return MpsBackend(terms, config.mps.max_bond, config.mps.cutoff, record_bonds=config.mps.dump_bonds)
    return DenseBackend(terms)


def boundary_vectors(config: RunConfig, n_spins: int):
    if config.backend.kind == "mps":
        return boundary_mps(n_spins)
    return boundary_states(n_spins, config.vectorization.kind)


def compute_map(config: RunConfig, params: ModelParams, grid: FrequencyGrid,
                pool: Optional[WorkerPool] = None) -> SpectralMap:
    backend = build_backend(config, params)
    psi_left, psi_right = boundary_vectors(config, params.n_spins)
    return spectral_map(grid, backend, psi_left, psi_right, config.kpm.to_params(), pool=pool)


def _record_map(ctx: RunContext, smap: SpectralMap, prefix: str = "map"):
    ctx.report.diagnostics[prefix] = {
        "grid": vars(smap.grid),
        "scale": smap.kpm.scale,
        "n_moments": smap.kpm.n_moments,
        "sigma_omega": smap.kpm.scale * smap.kpm.sigma,
        "truncation_error": smap.truncation_error,
        "symmetry_residual": smap.symmetry_residual,
        "total_weight": smap.total_weight(),
        "expected_weight": smap.expected_weight,
    }
    if smap.symmetry_residual is not None:
        ctx.report.add_check(f"{prefix}-symmetry", smap.symmetry_residual, Settings.SYMMETRY_TOLERANCE,
                             smap.symmetry_residual <= Settings.SYMMETRY_TOLERANCE)


def oracle_series(config: RunConfig, params: ModelParams, name: str, times: np.ndarray) -> TimeSeries:
    """Série de um oráculo amostrada nos mesmos tempos da reconstrução."""
    if name == "ed":
        return ed_autocorrelator(params, times)
    if name == "damping":
        return damping_autocorrelator(params, times)[0]
    if name == "rk4":
        if times.size == 1:
            return rk4_autocorrelator(params, config.oracle.rk4_step, 0.0)
        dt = float(times[1] - times[0])
        every = max(1, int(round(dt / config.oracle.rk4_step)))
        series = rk4_autocorrelator(params, dt / every, float(times[-1]), every)
        return TimeSeries(times, series.values[:times.size], "rk4", series.metadata)
    raise ConfigError(f"Oráculo desconhecido: {name}", "oracle")


# =============================================================================
# COMANDOS
# =============================================================================
def cmd_spectrum(ctx: RunContext, refine: Optional[Tuple[float, float, float, float]] = None) -> SpectralMap:
    grid = ctx.config.grid.to_grid()
    smap = compute_map(ctx.config, ctx.params, grid, ctx.pool)
    DataProcessor.write_spectral_map(ctx.emit("spectrum.csv"), smap)
    _record_map(ctx, smap)
    ctx.report.diagnostics["candidate_rectangles"] = candidate_rectangles(smap)
    ctx.report.diagnostics["relaxation_rate"] = extract_relaxation_rate(smap).summary()
    if smap.bond_rows:
        DataProcessor.write_bonds(ctx.emit("bonds.csv"), smap.bond_rows)
    if ctx.svg:
        charts = NhkpmCharts()
        ctx.report.diagnostics["color_range"] = charts.heatmap_abs(smap, ctx.emit("spectrum.svg"))
        charts.real_imag_maps(smap, ctx.emit("spectrum_re_im.svg"))

    if refine is not None:
        fine_grid = grid.refined(*refine)
        fine = compute_map(ctx.config, ctx.params, fine_grid, ctx.pool)
        DataProcessor.write_spectral_map(ctx.emit("spectrum_refined.csv"), fine)
        _record_map(ctx, fine, "refined")
        if ctx.svg:
            NhkpmCharts().heatmap_abs(fine, ctx.emit("spectrum_refined.svg"))
    return smap


def cmd_dynamics(ctx: RunContext, oracles: Sequence[str] = (), from_spectrum: Optional[Path] = None) -> TimeSeries:
    times = time_axis(ctx.config.times.t_max, ctx.config.times.n_samples)
    if from_spectrum is not None:
        try:
            smap = DataProcessor.read_spectral_map(from_spectrum, ctx.config.kpm.to_params())
        except (OSError, ValueError) as e:
            raise ConfigError(f"Não foi possível ler o mapa {from_spectrum}: {e}", "from_spectrum") from e
    else:
        smap = compute_map(ctx.config, ctx.params, ctx.config.grid.to_grid(), ctx.pool)
        _record_map(ctx, smap)
    series = autocorrelator(smap, times)
    overlays = {name: oracle_series(ctx.config, ctx.params, name, times) for name in oracles}
    DataProcessor.write_time_series(ctx.emit("ct.csv"), series, overlays)

    ctx.report.diagnostics["captured_weight"] = series.metadata["captured_weight"]
    # peso fora da grade distorce C(t) inteiro, a começar por C(0)
    ctx.report.add_check("weight-coverage", abs(series.metadata["captured_weight"] - smap.expected_weight),
                         0.03, series.metadata["coverage_ok"],
                         detail="amplie a faixa de Im ω ou aumente M" if not series.metadata["coverage_ok"] else "")
    ctx.report.add_check("realness", series.metadata["imag_residue"], Settings.IMAG_RESIDUE_TOLERANCE,
                         series.metadata["imag_residue"] <= Settings.IMAG_RESIDUE_TOLERANCE)
    for name, other in overlays.items():
        deviation = float(np.max(np.abs(series.values - other.values)))
        ctx.report.add_check(f"deviation-{name}", deviation, 0.02, deviation < 0.02, gating=False)
    if times.size >= 3:
        ctx.report.diagnostics["decay_rate"] = decay_rate(series)
    if ctx.svg:
        NhkpmCharts().time_series(series, ctx.emit("ct.svg"), overlays)
    return series


def cmd_project(ctx: RunContext):
    smap = compute_map(ctx.config, ctx.params, ctx.config.grid.to_grid(), ctx.pool)
    _record_map(ctx, smap)
    cp = project_map(smap)
    rate = extract_relaxation_rate(smap)
    DataProcessor.write_projected(ctx.emit("cp.csv"), cp)
    ctx.report.diagnostics["relaxation_rate"] = rate.summary()
    ctx.report.add_check("projected-realness", cp.imag_residue, Settings.IMAG_RESIDUE_TOLERANCE,
                         cp.imag_residue <= Settings.IMAG_RESIDUE_TOLERANCE)
    if ctx.svg:
        NhkpmCharts().projected(cp, ctx.emit("cp.svg"), rate.delta if rate.found else None)
    return cp, rate


def _zeno_point(config: RunConfig, gamma: float):
    """Um ponto da varredura em γ (executado num processo do pool)."""
    params = config.model.to_params(gamma=gamma)
    smap = compute_map(config, params, config.grid.to_grid())
    cp = project_map(smap)
    return cp, extract_relaxation_rate(smap)


def cmd_zeno_scan(ctx: RunContext):
    scan = ctx.config.gamma_scan
    if scan is None:
        raise ConfigError("zeno-scan exige a seção [gamma_scan]", "gamma_scan")
    gammas = np.linspace(scan.gamma_min, scan.gamma_max, scan.n_points)
    results = ctx.pool.run_keyed(_zeno_point, {k: (ctx.config, float(g)) for k, g in enumerate(gammas)})
    cps = [(float(gammas[k]), results[k][0]) for k in sorted(results)]
    rates = [(float(gammas[k]), results[k][1]) for k in sorted(results)]
    DataProcessor.write_cp_scan(ctx.emit("cp_scan.csv"), cps)
    DataProcessor.write_delta_vs_gamma(ctx.emit("delta_vs_gamma.csv"), rates)

    found = [(g, r.delta) for g, r in rates if r.found]
    if found:
        gamma_c, delta_max = max(found, key=lambda item: item[1])
        ctx.report.diagnostics["gamma_c"] = gamma_c
        ctx.report.diagnostics["delta_max"] = delta_max
    ctx.report.diagnostics["not_found"] = [g for g, r in rates if not r.found]
    if ctx.svg:
        deltas = [r.delta if r.found else np.nan for _, r in rates]
        NhkpmCharts().gamma_scan(gammas, [cp for _, cp in cps], ctx.emit("cp_scan.svg"), deltas)
        NhkpmCharts().delta_vs_gamma(gammas, deltas, ctx.emit("delta_vs_gamma.svg"))
    return rates


def cmd_oracle(ctx: RunContext, kind: str):
    params = ctx.params
    times = time_axis(ctx.config.times.t_max, ctx.config.times.n_samples)
    if kind == "ed":
        spectrum = ed_spectrum(params, ctx.basis)
        series = ed_autocorrelator(params, times, spectrum)
        DataProcessor.write_time_series(ctx.emit("ct_ed.csv"), series)
        DataProcessor.write_poles(ctx.emit("ed_poles.csv"), spectrum.eigenvalues, spectrum.weights)
        ctx.report.diagnostics["relaxation_rate"] = ed_relaxation_rate(params, spectrum=spectrum).summary()
        ctx.report.add_check("ed-reconstruction", spectrum.decomposition.reconstruction_error,
                             Settings.BIORTHO_TOLERANCE, spectrum.decomposition.reconstruction_ok, gating=False)
    elif kind == "rk4":
        series = oracle_series(ctx.config, params, "rk4", times)
        DataProcessor.write_time_series(ctx.emit("ct_rk4.csv"), series)
        ctx.report.add_check("rk4-trace", series.metadata["trace_drift"], 1e-9, series.metadata["trace_drift"] < 1e-9)
        ctx.report.add_check("rk4-hermiticity", series.metadata["hermiticity_drift"], 1e-9,
                             series.metadata["hermiticity_drift"] < 1e-9)
    elif kind == "damping":
        damping = build_damping_matrix(params)
        series, spectrum = damping_autocorrelator(params, times, damping)
        DataProcessor.write_time_series(ctx.emit("ct_damping.csv"), series)
        DataProcessor.write_x_spectrum(ctx.emit("x_spectrum.csv"), spectrum.eigenvalues, spectrum.overlap_weight)
        rate = damping_relaxation_rate(params, spectrum=spectrum)
        ctx.report.diagnostics["relaxation_rate"] = rate.summary()
        # gap de X sem ponderar pela sobreposição com σᶻ_N
        ctx.report.diagnostics["spectral_gap"] = damping_spectral_gap(params, damping)
        ctx.report.diagnostics["norm_residual"] = damping.norm_residual
        ctx.report.diagnostics["completeness_residual"] = damping.completeness_residual
        max_re = float(np.max(spectrum.eigenvalues.real))
        ctx.report.add_check("damping-stability", max_re, 1e-10, max_re <= 1e-10)
        n_small, deviation = damping_cross_check(params)
        ctx.report.add_check("damping-vs-ed", deviation, 1e-7, deviation < 1e-7, detail=f"N'={n_small}")
        if ctx.svg:
            NhkpmCharts().x_spectrum(spectrum.eigenvalues, spectrum.overlap_weight, ctx.emit("x_spectrum.svg"))
    else:
        raise ConfigError(f"Oráculo desconhecido: {kind}", "oracle")
    if ctx.svg:
        NhkpmCharts().time_series(series, ctx.emit(f"ct_{kind}.svg"))
    return series


# =============================================================================
# VALIDAÇÃO
# =============================================================================
def run_validation(config: RunConfig, report: RunReport, seed: int = 1234):
    """Bateria de invariantes; cada checagem entra no relatório com nome, valor e tolerância."""
    p = config.model.to_params()
    n_moments = config.kpm.n_moments
    rng = np.random.default_rng(seed)

    try:
        error = verify_principal_value_coefficients(n_moments)
        report.add_check("principal-value-coefficients", error, 1e-8, True)
    except KernelCheckError as e:
        report.add_check(e.check, None, 1e-8, False, detail=e.message)
    try:
        info = kernel_self_test(n_moments)
        report.add_check("jackson-kernel", info["max_ratio"], 3.0, True)
    except KernelCheckError as e:
        report.add_check("jackson-kernel", None, 3.0, False, detail=e.message)

    if 4 ** p.n_spins > Settings.DENSE_LIMIT:
        report.diagnostics["skipped"] = "checagens densas omitidas: 4^N acima do limite denso"
        return

    # equivalência da vetorização nas duas bases
    worst = trace_error = 0.0
    for basis in VectorizationBasis:
        op = build_transformed_liouvillian(p, basis).to_operator()
        for _ in range(20):
            rho = rng.normal(size=(p.dim, p.dim)) + 1j * rng.normal(size=(p.dim, p.dim))
            image = apply_liouvillian(p, rho)
            worst = max(worst, float(np.max(np.abs(op @ vectorize(rho, basis) - vectorize(image, basis)))))
            trace_error = max(trace_error, abs(np.trace(image)))
    report.add_check("vectorization-equivalence", worst, 1e-10, worst < 1e-10)
    report.add_check("trace-preservation", trace_error, 1e-10, trace_error < 1e-10)

    basis = config.vectorization.kind
    terms = build_transformed_liouvillian(p, basis)
    residual = float(np.max(np.abs(terms.to_operator() @ steady_state_vector(p.n_spins, basis))))
    report.add_check("steady-state", residual, 1e-12, residual < 1e-12)

    spectrum = ed_spectrum(p, basis)
    c0 = abs(complex(spectrum.weights.sum()) - 1.0)
    report.add_check("ed-weight-sum", c0, 1e-8, c0 < 1e-8)

    # momentos e G em nós de teste
    backend = DenseBackend(terms)
    psi_left, psi_right = boundary_states(p.n_spins, basis)
    scale_grid = FrequencyGrid(-1.0, 1.0, -1.0, 1.0, 3, 3)
    kpm = KpmParams(max(n_moments, 512)).with_scale(estimate_scale(terms, scale_grid))
    omega = complex(-0.3, 0.4)
    mu = chebyshev_moments(omega, backend, psi_left, psi_right, kpm)
    even = float(np.max(np.abs(mu[0::2])) / max(np.max(np.abs(mu)), 1e-300))
    report.add_check("even-moments", even, 1e-10, even < 1e-10)

    g = greens_at_zero(mu, kpm)
    g_conj = greens_at_zero(chebyshev_moments(np.conj(omega), backend, psi_left, psi_right, kpm), kpm)
    symmetry = abs(g_conj - np.conj(g)) / max(abs(g), 1e-300)
    report.add_check("greens-symmetry", symmetry, Settings.SYMMETRY_TOLERANCE, symmetry < Settings.SYMMETRY_TOLERANCE)

    far = complex(1.0, 0.5)
    exact = complex(np.sum(spectrum.weights / (far - spectrum.eigenvalues)))
    approx = complex(greens_at_zero(chebyshev_moments(far, backend, psi_left, psi_right, kpm), kpm))
    resolvent = abs(approx - exact) / abs(exact)
    report.add_check("ed-resolvent", resolvent, 1e-2, resolvent < 1e-2)

    # oráculos cruzados
    rk4 = rk4_autocorrelator(p, config.oracle.rk4_step, 2.0)
    ed = ed_autocorrelator(p, rk4.times, spectrum)
    deviation = float(np.max(np.abs(rk4.values - ed.values)))
    report.add_check("ed-rk4", deviation, 1e-6, deviation < 1e-6)
    if p.Jz == 0:
        times = np.linspace(0.0, 5.0, 51)
        damping, x_spectrum = damping_autocorrelator(p, times)
        deviation = float(np.max(np.abs(damping.values - ed_autocorrelator(p, times, spectrum).values)))
        report.add_check("ed-damping", deviation, 1e-7, deviation < 1e-7)
        max_re = float(np.max(x_spectrum.eigenvalues.real))
        report.add_check("damping-stability", max_re, 1e-10, max_re <= 1e-10)

    if basis == VectorizationBasis.PERMUTED and p.n_spins <= 4:
        small = KpmParams(32).with_scale(kpm.scale)
        dense_mu = chebyshev_moments(omega, backend, psi_left, psi_right, small)
        mps_left, mps_right = boundary_mps(p.n_spins)
        mps_mu = chebyshev_moments(omega, MpsBackend(terms, max_bond=10 ** 6, cutoff=0.0),
                                   mps_left, mps_right, small)
        deviation = float(np.max(np.abs(dense_mu - mps_mu)))
        report.add_check("mps-dense-moments", deviation, 1e-8, deviation < 1e-8)


def cmd_validate(ctx: RunContext):
    run_validation(ctx.config, ctx.report)
    return ctx.report.failed_checks


# =============================================================================
# PARSER E DESPACHO
# =============================================================================
def _rectangle(text: str) -> Tuple[float, float, float, float]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Retângulo inválido: {text}")
    if len(values) != 4 or values[1] <= values[0] or values[3] <= values[2]:
        raise argparse.ArgumentTypeError("Use --refine re_min,re_max,im_min,im_max com max > min")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Arquivo TOML da execução")
    common.add_argument("--backend", choices=["dense", "mps"], help="Sobrescreve backend.kind")
    common.add_argument("--workers", type=int, help="Número de processos")
    common.add_argument("--svg", action="store_true", help="Grava figuras SVG")
    common.add_argument("--dump-terms", action="store_true", help="Imprime os termos de 𝓛̃")
    common.add_argument("--verbose", "-v", action="store_true", help="Logging em nível DEBUG")

    parser = argparse.ArgumentParser(prog="nhkpm", description="Espectros e dinâmica de Liouvillianos via NHKPM")
    sub = parser.add_subparsers(dest="command", required=True)
    spectrum = sub.add_parser("spectrum", parents=[common], help="Mapa C(ω) na grade")
    spectrum.add_argument("--refine", type=_rectangle, help="re_min,re_max,im_min,im_max do passe fino")
    dynamics = sub.add_parser("dynamics", parents=[common], help="C(t) reconstruído do mapa")
    dynamics.add_argument("--oracle", action="append", choices=ORACLES, default=[],
                          help="Sobrepõe a série de um oráculo (repetível)")
    dynamics.add_argument("--from-spectrum", type=Path, help="Usa um spectrum.csv já calculado")
    sub.add_parser("project", parents=[common], help="Correlador projetado C_P(Γ) e Δ")
    sub.add_parser("zeno-scan", parents=[common], help="Varredura em γ")
    oracle = sub.add_parser("oracle", parents=[common], help="Executa um oráculo exato")
    oracle.add_argument("kind", choices=ORACLES)
    sub.add_parser("validate", parents=[common], help="Bateria de invariantes")
    return parser


def _dispatch(args, ctx: RunContext):
    if args.command == "spectrum":
        cmd_spectrum(ctx, args.refine)
    elif args.command == "dynamics":
        cmd_dynamics(ctx, list(dict.fromkeys(args.oracle + ctx.config.oracle.overlay)), args.from_spectrum)
    elif args.command == "project":
        cmd_project(ctx)
    elif args.command == "zeno-scan":
        cmd_zeno_scan(ctx)
    elif args.command == "oracle":
        cmd_oracle(ctx, args.kind)
    elif args.command == "validate":
        cmd_validate(ctx)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    report = RunReport(args.command)
    out_dir = Path(Settings.output_dir("out"))
    code = EXIT_OK
    try:
        config = apply_overrides(load_run_config(args.config), backend=args.backend,
                                 workers=args.workers, svg=args.svg)
        out_dir = config.output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        report.backend = config.backend.kind
        ctx = RunContext(config, out_dir, WorkerPool(config.backend.workers, on_progress=log_progress), report)
        if args.dump_terms:
            for line in build_transformed_liouvillian(ctx.params, ctx.basis).dump():
                print(line)
        _dispatch(args, ctx)
        if report.failed_checks:
            logger.error(f"Invariantes violados: {', '.join(report.failed_checks)}")
            code = EXIT_INVARIANT
    except (ConfigError, GridError, ModelError, MpoRangeError) as e:
        logger.error(f"Erro de configuração: {e.message}")
        report.error, code = e.message, EXIT_CONFIG
    except ResourceError as e:
        logger.error(f"Limite de recursos: {e.message}")
        report.error, code = e.message, EXIT_RESOURCE
    except (ScaleViolationError, KernelCheckError, DimensionError) as e:
        logger.error(f"Falha numérica: {e.message}")
        report.error, code = e.message, EXIT_INVARIANT
    except OracleError as e:
        logger.error(f"Falha de oráculo: {e.message}")
        report.error, code = e.message, e.exit_code
    finally:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            DataProcessor.write_report(out_dir / Settings.REPORT_NAME, report)
        except OSError as e:
            logger.error(f"Não foi possível gravar o relatório: {str(e)}")
    return code
