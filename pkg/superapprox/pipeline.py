"""Experiment runner: one validated config in, one deterministic artifact out."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional

import numpy as np

from .approxsub import (
    SubsetView,
    bounded_gen_check,
    commutator_fill,
    minimal_bounded_generation,
    pq_predicate,
    tripling_stats,
)
from .artifacts import (
    Artifact,
    payload_csv,
    render_json,
    survey_csv,
    survey_records,
    write_artifact,
)
from .cache import SurveyCache
from .contracts import (
    Command,
    ExperimentConfig,
    OutputFormat,
    load_analytic_map,
    load_generator_set,
    load_leaf_set,
    load_subset,
)
from .groupgen import (
    GeneratorSet,
    Quotient,
    cayley_graph,
    default_max_order,
    edge_list_lines,
    enumerate_quotient,
    undirected_edge_count,
)
from .modring import Modulus
from .observability import get_logger, log_event
from .padic import TruncatedPoint, hensel_solve, minimal_summands, sumset_coverage
from .spectral import (
    SurveyRow,
    equidistribution_check,
    expander_survey,
    spectral_gap,
    survey_row,
    translation_orbit_size,
)
from .treereg import (
    block_regularize,
    check_block_regularization,
    check_regularization,
    regularize,
)

LOGGER = get_logger(__name__)


@dataclass(frozen=True)
class RunOutcome:
    command: Command
    exit_code: int
    payload: Any
    text: str
    outputs: tuple[Artifact, ...] = ()


Handler = Callable[[ExperimentConfig], tuple[Any, str, int]]


class ExperimentRunner:
    """
    Runs one validated experiment and writes its artifacts.

    Exit codes: 0 on success, 1 when rows or checks recorded a soft failure.
    Invalid configurations raise before any computation starts.
    """

    def __init__(self, cache: Optional[SurveyCache] = None):
        self.cache = cache if cache is not None else SurveyCache()
        self._handlers: dict[Command, Handler] = {
            Command.SURVEY: self._survey,
            Command.GAP: self._gap,
            Command.QUOTIENT: self._quotient,
            Command.REGULARIZE: self._regularize,
            Command.TRIPLING: self._tripling,
            Command.BOUNDEDGEN: self._boundedgen,
            Command.COMMFILL: self._commfill,
            Command.HENSEL: self._hensel,
            Command.SUMSET: self._sumset,
            Command.EQUIDIST: self._equidist,
        }

    def run(self, config: ExperimentConfig) -> RunOutcome:
        config.validate_for_command()
        payload, text, exit_code = self._handlers[config.command](config)
        outputs = (write_artifact(config.out, text),) if config.out is not None else ()
        log_event(
            LOGGER,
            "experiment_completed",
            command=config.command.value,
            exit_code=exit_code,
            outputs=[str(a.path) for a in outputs],
        )
        return RunOutcome(config.command, exit_code, payload, text, outputs)

    @staticmethod
    def _render(config: ExperimentConfig, payload: dict[str, Any]) -> str:
        if config.format is OutputFormat.JSON:
            return render_json(payload)
        return payload_csv(payload)

    @staticmethod
    def _max_order(config: ExperimentConfig) -> int:
        return config.max_order if config.max_order is not None else default_max_order()

    def _quotient_for(self, config: ExperimentConfig) -> Quotient:
        omega = load_generator_set(config.gens or "")
        return enumerate_quotient(omega, config.parsed_modulus(), self._max_order(config))

    def _subset_for(self, config: ExperimentConfig, G: Quotient) -> SubsetView:
        if config.subset is not None:
            return load_subset(config.subset, G)
        return SubsetView.generators(G, include_identity=True)

    def _survey_rows(
        self, config: ExperimentConfig, omega: GeneratorSet, moduli: list[Modulus]
    ) -> list[SurveyRow]:
        max_order = self._max_order(config)
        digest = omega.digest()
        cached: dict[int, SurveyRow] = {}
        if config.reuse_cache:
            for q in moduli:
                record = self.cache.get(digest, q.value, config.seed, max_order)
                if record is not None:
                    log_event(LOGGER, "survey_cache_hit", q=q.value)
                    cached[q.value] = SurveyRow.from_record(record)
        missing = [q for q in moduli if q.value not in cached]
        computed = expander_survey(
            omega, missing, max_order=max_order, seed=config.seed, jobs=config.jobs
        )
        for row in computed:
            cached[row.q] = row
            if config.reuse_cache and not row.failed:
                self.cache.set(digest, row.q, config.seed, max_order, row.as_record())
        return [cached[q.value] for q in moduli]

    def _render_rows(self, config: ExperimentConfig, rows: list[SurveyRow]) -> tuple[Any, str, int]:
        records = survey_records(rows, config.timings)
        if config.format is OutputFormat.JSON:
            text = render_json(records)
        else:
            text = survey_csv(rows, config.timings)
        return records, text, 1 if any(r.failed for r in rows) else 0

    def _survey(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        omega = load_generator_set(config.gens or "")
        rows = self._survey_rows(config, omega, config.parsed_moduli())
        return self._render_rows(config, rows)

    def _gap(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        omega = load_generator_set(config.gens or "")
        q = config.parsed_modulus()
        if config.reuse_cache:
            rows = self._survey_rows(config, omega, [q])
        else:
            rows = [survey_row(omega, q, self._max_order(config), seed=config.seed)]
        return self._render_rows(config, rows)

    def _quotient(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        G = self._quotient_for(config)
        graph = cayley_graph(G)
        payload = {
            "modulus": str(G.modulus),
            "order": G.order,
            "generators": G.generator_count,
            "arcs": graph.number_of_edges(),
            "edges": undirected_edge_count(graph),
        }
        if config.format is OutputFormat.JSON:
            return payload, render_json(payload), 0
        return payload, "".join(line + "\n" for line in edge_list_lines(G)), 0

    def _regularize(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        A = load_leaf_set(config.leaves)  # type: ignore[arg-type]
        eps = config.epsilon_value()
        if config.block:
            result = block_regularize(A, eps)
            checks = check_block_regularization(A, result, eps)
        else:
            result = regularize(A, eps)
            checks = check_regularization(A, result, eps)
        payload = result.to_payload()
        payload["checks"] = asdict(checks)
        payload["violations"] = checks.violations()
        return payload, self._render(config, payload), 1 if checks.violations() else 0

    def _tripling(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        G = self._quotient_for(config)
        A = self._subset_for(config, G)
        payload = pq_predicate(A, config.delta_value(), config.walk_length or 0).to_payload()
        if config.epsilon is not None:
            payload["tripling"] = tripling_stats(A, config.epsilon_value()).to_payload()
        return payload, self._render(config, payload), 0

    def _boundedgen(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        G = self._quotient_for(config)
        A = self._subset_for(config, G)
        level = config.level or 0
        payload: dict[str, Any] = {"level": level, "subset_size": len(A), "order": G.order}
        if config.C is not None:
            payload["C"] = config.C
            payload["holds"] = bounded_gen_check(A, config.C, level)
        else:
            payload["minimal_C"] = minimal_bounded_generation(A, level)
        return payload, self._render(config, payload), 0

    def _commfill(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        fill = commutator_fill(self._quotient_for(config))
        payload = fill.to_payload()
        exit_code = 1 if fill.bound_ok is False or not fill.closure_agrees else 0
        return payload, self._render(config, payload), exit_code

    def _hensel(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        F = load_analytic_map(config.map)  # type: ignore[arg-type]
        x0 = TruncatedPoint.of(F.p, config.precision or 1, config.point)
        result = hensel_solve(F, x0, config.target, config.l or 0, config.k0)
        payload = result.to_payload()
        return payload, self._render(config, payload), 0

    def _sumset(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        F = load_analytic_map(config.map)  # type: ignore[arg-type]
        level, precision = config.l or 0, config.precision or 1
        if config.C is not None:
            result = sumset_coverage(F, level, config.C, precision, method=config.method)
            payload = result.to_payload()
            return payload, self._render(config, payload), 0
        found = minimal_summands(F, level, precision, method=config.method)
        payload: dict[str, Any] = found.to_payload() if found is not None else {"covered": False}
        payload["minimal_C"] = found.summands if found is not None else None
        return payload, self._render(config, payload), 0

    def _equidist(self, config: ExperimentConfig) -> tuple[Any, str, int]:
        G = self._quotient_for(config)
        lam = spectral_gap(G, seed=config.seed).lam
        rng = np.random.default_rng(config.seed)
        lengths = range(1, (config.walk_length or 0) + 1)
        checks = violations = 0
        worst = 0.0
        for _ in range(config.functions):
            f = rng.standard_normal(G.order)
            orbit = translation_orbit_size(G, f)
            for length in lengths:
                report = equidistribution_check(G, f, length, lam, orbit_size=orbit)
                checks += 1
                violations += not report.passed
                if report.rhs > 0:
                    worst = max(worst, report.lhs / report.rhs)
        payload = {
            "modulus": str(G.modulus),
            "order": G.order,
            "lambda": lam,
            "functions": config.functions,
            "walk_length": config.walk_length,
            "checks": checks,
            "violations": violations,
            "max_ratio": worst,
        }
        return payload, self._render(config, payload), 1 if violations else 0
