"""End-to-end training loop, experiment configuration, and comparison runs.

One training iteration: draw an ID batch and a candidate batch of pool
outliers, score the candidates with the current model, cluster their
(normalized) penultimate features, select outliers with the configured
strategy, and take one SGD step on the combined loss. The final model is
evaluated on the held-out ID/OOD test splits with the score matching the
training loss.

Every stochastic choice derives from the run seed through stateless stream
keys, so a (config, seed) pair reproduces a run byte-for-byte and resuming
from a checkpoint matches an uninterrupted run exactly.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import datetime
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import model as mdl
from .clustering import calinski_harabasz, kmeans_normalized
from .data import (
    EmbeddingDataset,
    ToyConfig,
    candidate_batches,
    generate_toy,
    load_embeddings,
    toy_to_embeddings,
)
from .errors import (
    ConfigError,
    DegenerateVectorError,
    DivergenceError,
    InvalidKError,
    InvalidRequestError,
    UndefinedMetricError,
)
from .evaluation import EvalReport, build_report, export_report, id_accuracy
from .numeric import check_finite, child_rng, child_seed, normalize_rows
from .sampling import (
    CandidateBatch,
    diversity_delta,
    sample_biased,
    sample_dos,
    sample_greedy,
    sample_random,
    sample_uniform_clusters,
    selection_rows,
)
from .scoring import LOSS_GRAD_FUNCTIONS, SCORE_FUNCTIONS, absent_category_scores

# Stream ids for stateless seed derivation.
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_ID_SHUFFLE = 2
STREAM_CANDIDATES = 3
STREAM_KMEANS = 4
STREAM_SAMPLE = 5

STRATEGIES = ("random", "greedy", "biased", "uniform", "dos")
LOSSES = ("absent_category", "oe_uniform", "energy")
FEATURE_MODES = ("normalized", "raw")

# Evaluation score paired with each training loss.
EVAL_SCORE_BY_LOSS = {"absent_category": "absent", "oe_uniform": "msp", "energy": "energy"}


@dataclass
class ExperimentConfig:
    dataset: str = "toy"  # "toy" or a path to an embedding file
    toy: ToyConfig = field(default_factory=ToyConfig)
    hidden_dims: tuple[int, ...] = (128, 128)
    epochs: int = 100
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    milestones: tuple[int, ...] = (75, 90)
    lr_decay: float = 0.1
    id_batch: int = 64
    ood_batch: int = 64
    candidate_size: int = 256
    k_clusters: int = 64
    strategy: str = "dos"
    biased_cluster: int | None = None
    loss: str = "absent_category"
    lam: float = 1.0
    m_in: float = -1.0
    m_out: float = 1.0
    seed: int = 0
    feature_mode: str = "normalized"
    out_dir: str | None = None

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"unknown feature_mode {self.feature_mode!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if min(self.id_batch, self.ood_batch, self.candidate_size, self.k_clusters) < 1:
            raise ConfigError("batch sizes and k_clusters must be >= 1")
        if self.k_clusters > self.candidate_size:
            raise ConfigError(
                f"k_clusters {self.k_clusters} exceeds candidate_size {self.candidate_size}"
            )
        if self.strategy == "dos" and self.ood_batch != self.k_clusters:
            raise ConfigError(
                "the per-cluster strategy selects one outlier per cluster: "
                f"ood_batch ({self.ood_batch}) must equal k_clusters ({self.k_clusters})"
            )
        if self.ood_batch > self.candidate_size:
            raise ConfigError("ood_batch cannot exceed candidate_size")
        if self.lr <= 0 or not 0 <= self.momentum < 1:
            raise ConfigError("need lr > 0 and momentum in [0, 1)")
        if self.loss == "energy" and not self.m_in < self.m_out:
            raise ConfigError(f"energy margins need m_in < m_out, got {self.m_in}, {self.m_out}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if not any(d >= 1 for d in self.hidden_dims) and self.hidden_dims:
            raise ConfigError("hidden dims must be positive")
        if self.dataset == "toy":
            self.toy.validate()

    def canonical_text(self) -> str:
        """Stable textual form used for the checkpoint config hash.

        The output directory and the epoch count are excluded: relocating a
        run or extending its schedule must not invalidate its checkpoints.
        """
        payload = dataclasses.asdict(self)
        payload.pop("out_dir")
        payload.pop("epochs")
        return json.dumps(payload, sort_keys=True, default=str)


_CONFIG_SCHEMA = {
    "data": {"dataset": str},
    "toy": {
        "n_classes": int, "id_sigma": float, "n_train_per_class": int,
        "n_test_per_class": int, "n_pool_clusters": int, "n_test_clusters": int,
        "ood_sigma": float, "cluster_size": int, "ring_radius": float,
    },
    "model": {"hidden_dims": "int_tuple"},
    "optim": {
        "epochs": int, "lr": float, "momentum": float, "weight_decay": float,
        "milestones": "int_tuple", "lr_decay": float,
    },
    "sampling": {
        "id_batch": int, "ood_batch": int, "candidate_size": int,
        "k_clusters": int, "strategy": str, "biased_cluster": "opt_int",
    },
    "loss": {"loss": str, "lam": float, "m_in": float, "m_out": float},
    "run": {"seed": int, "feature_mode": str, "out_dir": "opt_str"},
}


def _convert(raw: str, kind, section: str, key: str):
    raw = raw.strip()
    try:
        if kind == "int_tuple":
            return tuple(int(v) for v in raw.split(",") if v.strip()) if raw else ()
        if kind == "opt_int":
            return int(raw) if raw else None
        if kind == "opt_str":
            return raw or None
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def parse_config_file(path) -> ExperimentConfig:
    """Read the INI-style experiment file; unknown sections or keys are errors
    and every field falls back to its default when absent."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    config = ExperimentConfig()
    for section in parser.sections():
        if section == "grid":
            continue  # consumed by the comparison runner
        if section not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            value = _convert(raw, _CONFIG_SCHEMA[section][key], section, key)
            if section == "toy":
                setattr(config.toy, key, value)
            else:
                setattr(config, key, value)
    config.validate()
    return config


def load_dataset(config: ExperimentConfig) -> EmbeddingDataset:
    if config.dataset == "toy":
        return toy_to_embeddings(generate_toy(child_seed(config.seed, STREAM_DATA), config.toy))
    return load_embeddings(config.dataset)


@dataclass
class EpochStats:
    epoch: int
    lr: float
    loss_total: float
    loss_id: float
    loss_ood: float
    delta: float          # mean nearest-neighbor distance of selections
    ch: float             # candidate-clustering Calinski-Harabasz index
    uncertainty: float    # mean p(absent|x) over selected outliers


@dataclass
class RunArtifacts:
    config: ExperimentConfig
    report: EvalReport
    epoch_log: list[EpochStats]
    selections: list[tuple[int, int, int, float, str]]  # epoch + selection row
    model: mdl.MlpModel
    sgd_state: mdl.SgdState
    warnings: list[str]


def _finite_mean(values: list[float]) -> float:
    finite = [v for v in values if np.isfinite(v)]
    return float(np.mean(finite)) if finite else float("nan")


def _select(config: ExperimentConfig, candidates: CandidateBatch, clusters,
            rng: np.random.Generator, warnings: list[str] | None = None):
    if clusters is None or config.strategy == "random":
        return sample_random(candidates, config.ood_batch, rng)
    if config.strategy == "greedy":
        return sample_greedy(candidates, config.ood_batch)
    if config.strategy == "biased":
        if config.biased_cluster is not None:
            # A pinned target cluster can fall short of the draw size on some
            # candidate batches; the most populous cluster never can (the
            # config guarantees ood_batch <= candidate_size / k ceiling).
            try:
                return sample_biased(candidates, clusters, config.ood_batch, rng,
                                     cluster_index=config.biased_cluster)
            except InvalidRequestError as exc:
                if warnings is not None:
                    warnings.append(f"biased override infeasible ({exc}); "
                                    "using the most populous cluster")
        return sample_biased(candidates, clusters, config.ood_batch, rng)
    if config.strategy == "uniform":
        return sample_uniform_clusters(candidates, clusters, config.ood_batch, rng)
    return sample_dos(candidates, clusters)


def _loss_grads(config: ExperimentConfig, id_logits, id_labels, ood_logits, k: int):
    fn = LOSS_GRAD_FUNCTIONS[config.loss]
    if config.loss == "energy":
        return fn(id_logits, id_labels, ood_logits, k,
                  m_in=config.m_in, m_out=config.m_out, lam=config.lam)
    return fn(id_logits, id_labels, ood_logits, k, lam=config.lam)


def train(config: ExperimentConfig, out_dir: str | None = None,
          resume_from: str | None = None) -> RunArtifacts:
    """Run the full training loop and final evaluation for one configuration.

    Artifacts are written to ``out_dir`` (or config.out_dir) when given:
    report.json/report.csv, epoch_log.csv, selections.csv, model.ckpt, plus a
    run.log sidecar that is the only file carrying timestamps.
    """
    config.validate()
    out_dir = out_dir or config.out_dir
    warnings: list[str] = []

    ds = load_dataset(config)
    k = ds.n_classes
    if k < 1:
        raise ConfigError("dataset provides no ID classes")
    dims = (ds.dim, *config.hidden_dims, k + 1)

    chash = mdl.config_hash64(config.canonical_text())
    if resume_from is not None:
        ckpt = mdl.load_checkpoint(resume_from)
        if ckpt.config_hash != chash:
            raise ConfigError("checkpoint was produced by a different configuration")
        if ckpt.layer_dims != dims:
            raise ConfigError(f"checkpoint dims {ckpt.layer_dims} do not match {dims}")
        model = ckpt.to_model()
        velocities = [(vw.copy(), vb.copy()) for vw, vb in ckpt.velocities]
        start_epoch = ckpt.epoch
    else:
        model = mdl.init_mlp(dims, child_rng(config.seed, STREAM_INIT))
        velocities = [(np.zeros_like(w), np.zeros_like(b))
                      for w, b in zip(model.weights, model.biases)]
        start_epoch = 0
    state = mdl.SgdState(
        learning_rate=config.lr, momentum=config.momentum,
        weight_decay=config.weight_decay, milestones=config.milestones,
        decay_factor=config.lr_decay, velocities=velocities,
    )

    n_batches = ds.id_train.n // config.id_batch
    if config.epochs > start_epoch and n_batches == 0:
        raise ConfigError(
            f"id_batch {config.id_batch} exceeds the training split ({ds.id_train.n} rows)"
        )

    # Candidate batches come from a cycling shuffle-then-partition stream over
    # the pool; pass p is reshuffled with its own derived seed so any global
    # iteration index maps to a reproducible batch.
    if config.epochs > start_epoch:
        probe = candidate_batches(ds.ood_pool, config.candidate_size,
                                  child_rng(config.seed, STREAM_CANDIDATES, 0),
                                  min_size=config.k_clusters)
        batches_per_pass = len(probe)
        pass_cache = {0: probe}

        def candidate_for(global_it: int) -> np.ndarray:
            p, slot = divmod(global_it, batches_per_pass)
            if p not in pass_cache:
                pass_cache.clear()
                pass_cache[p] = candidate_batches(
                    ds.ood_pool, config.candidate_size,
                    child_rng(config.seed, STREAM_CANDIDATES, p),
                    min_size=config.k_clusters,
                )
            return pass_cache[p][slot]

    epoch_log: list[EpochStats] = []
    selections: list[tuple[int, int, int, float, str]] = []

    for epoch in range(start_epoch, config.epochs):
        lr = mdl.lr_at_epoch(state, epoch)
        perm = child_rng(config.seed, STREAM_ID_SHUFFLE, epoch).permutation(ds.id_train.n)
        totals, ids, oods, deltas, chs, uncerts = [], [], [], [], [], []
        last_selection = None
        for it in range(n_batches):
            global_it = epoch * n_batches + it
            rows = perm[it * config.id_batch:(it + 1) * config.id_batch]
            xb = ds.id_train.features[rows]
            yb = ds.id_train.labels[rows]

            def forward_checked(x):
                with np.errstate(over="ignore", invalid="ignore"):
                    logits, penultimate, cache = mdl.forward_cached(model, x)
                if not np.all(np.isfinite(logits)):
                    raise DivergenceError(
                        f"non-finite logits at epoch {epoch}, iteration {it}"
                    )
                return logits, penultimate, cache

            cand_idx = candidate_for(global_it)
            cand_x = ds.ood_pool[cand_idx]
            cand_logits, cand_feats, _ = forward_checked(cand_x)
            cand_scores = absent_category_scores(cand_logits, k)

            clusters = None
            feats_for_clustering = cand_feats
            try:
                if config.feature_mode == "normalized":
                    feats_for_clustering = normalize_rows(cand_feats)
                clusters = kmeans_normalized(
                    feats_for_clustering, config.k_clusters,
                    child_rng(config.seed, STREAM_KMEANS, global_it),
                    normalize=False,
                )
            except (DegenerateVectorError, InvalidKError) as exc:
                warnings.append(
                    f"epoch {epoch} iteration {it}: clustering failed ({exc}); "
                    "falling back to a uniform candidate draw"
                )
            candidates = CandidateBatch(features=feats_for_clustering,
                                        source_indices=cand_idx, scores=cand_scores)
            selection = _select(config, candidates, clusters,
                                child_rng(config.seed, STREAM_SAMPLE, global_it),
                                warnings)
            last_selection = (selection, candidates, clusters)

            if selection.m >= 2:
                deltas.append(diversity_delta(candidates.features[selection.indices]))
            if clusters is not None:
                try:
                    chs.append(calinski_harabasz(feats_for_clustering, clusters.assignments))
                except UndefinedMetricError:
                    pass
            if selection.m:
                uncerts.append(float(np.mean(1.0 - cand_scores[selection.indices])))

            id_logits, _, id_cache = forward_checked(xb)
            sel_x = cand_x[selection.indices]
            ood_logits, _, ood_cache = forward_checked(sel_x)
            loss, g_id, g_ood = _loss_grads(config, id_logits, yb, ood_logits, k)
            if not np.isfinite(loss.total):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, iteration {it}: {loss}"
                )
            grads_id = mdl.backward(model, id_cache, g_id)
            grads = grads_id
            if selection.m:
                grads_ood = mdl.backward(model, ood_cache, g_ood)
                grads = [(gi + go, bi + bo) for (gi, bi), (go, bo) in zip(grads_id, grads_ood)]
            try:
                model, state = mdl.sgd_step(model, grads, state, lr)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}, iteration {it}: {exc}") from None

            totals.append(loss.total)
            ids.append(loss.id_term)
            oods.append(loss.ood_term)

        if last_selection is not None:
            selection, candidates, clusters = last_selection
            for row in selection_rows(selection, candidates, clusters):
                selections.append((epoch, *row))
        epoch_log.append(EpochStats(
            epoch=epoch, lr=lr,
            loss_total=_finite_mean(totals), loss_id=_finite_mean(ids),
            loss_ood=_finite_mean(oods), delta=_finite_mean(deltas),
            ch=_finite_mean(chs), uncertainty=_finite_mean(uncerts),
        ))

    score_kind = EVAL_SCORE_BY_LOSS[config.loss]
    score_fn = SCORE_FUNCTIONS[score_kind]
    id_logits, _ = mdl.forward(model, ds.id_test.features)
    ood_logits, _ = mdl.forward(model, ds.ood_test)
    report = build_report(
        score_fn(id_logits, k), score_fn(ood_logits, k), id_accuracy(model, ds.id_test)
    )

    artifacts = RunArtifacts(
        config=config, report=report, epoch_log=epoch_log, selections=selections,
        model=model, sgd_state=state, warnings=warnings,
    )
    if out_dir is not None:
        _write_artifacts(artifacts, out_dir, chash)
    return artifacts


def _write_artifacts(artifacts: RunArtifacts, out_dir: str, config_hash: int) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfg = artifacts.config
    export_report(artifacts.report, os.path.join(out_dir, "report.json"), "json")
    export_report(artifacts.report, os.path.join(out_dir, "report.csv"), "csv")
    with open(os.path.join(out_dir, "epoch_log.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "loss_total", "loss_id", "loss_ood",
                         "delta", "ch", "uncertainty"])
        for s in artifacts.epoch_log:
            writer.writerow([s.epoch, repr(s.lr), repr(s.loss_total), repr(s.loss_id),
                             repr(s.loss_ood), repr(s.delta), repr(s.ch),
                             repr(s.uncertainty)])
    with open(os.path.join(out_dir, "selections.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "pool_index", "cluster_id", "score", "strategy"])
        for epoch, pool_index, cluster_id, score, strategy in artifacts.selections:
            writer.writerow([epoch, pool_index, cluster_id, repr(score), strategy])
    mdl.save_checkpoint(os.path.join(out_dir, "model.ckpt"), artifacts.model,
                        artifacts.sgd_state, cfg.epochs, cfg.seed, config_hash)
    with open(os.path.join(out_dir, "run.log"), "w") as fh:
        stamp = datetime.datetime.now().isoformat()
        fh.write(f"{stamp} run finished: strategy={cfg.strategy} loss={cfg.loss} "
                 f"seed={cfg.seed}\n")
        for w in artifacts.warnings:
            fh.write(f"{stamp} WARNING {w}\n")


# Fields allowed to differ between the configs of one comparison.
COMPARE_AXES = ("strategy", "loss", "seed", "k_clusters", "ood_batch", "biased_cluster")


@dataclass
class ComparisonRow:
    strategy: str
    loss: str
    seed: int
    fpr95: float
    auroc: float
    acc: float
    mean_delta: float
    mean_ch: float


@dataclass
class ComparisonAggregate:
    strategy: str
    loss: str
    n_runs: int
    fpr95_mean: float
    fpr95_std: float | None
    auroc_mean: float
    auroc_std: float | None
    acc_mean: float
    acc_std: float | None


@dataclass
class ComparisonResult:
    rows: list[ComparisonRow]
    aggregates: list[ComparisonAggregate]


def compare(configs: list[ExperimentConfig], out_dir: str | None = None) -> ComparisonResult:
    """Run each config and tabulate per-run metrics plus per-(strategy, loss)
    seed aggregates. Configs may differ only in the declared comparison axes
    and must share the dataset definition."""
    if not configs:
        raise ConfigError("compare needs at least one config")

    def shared_fields(cfg: ExperimentConfig) -> dict:
        payload = dataclasses.asdict(cfg)
        for key in (*COMPARE_AXES, "out_dir"):
            payload.pop(key)
        return payload

    reference = shared_fields(configs[0])
    for cfg in configs:
        cfg.validate()
        payload = shared_fields(cfg)
        if payload != reference:
            diff = [k for k in payload if payload[k] != reference[k]]
            raise ConfigError(f"configs differ outside the comparison axes: {diff}")

    rows: list[ComparisonRow] = []
    for cfg in configs:
        artifacts = train(cfg)
        rows.append(ComparisonRow(
            strategy=cfg.strategy, loss=cfg.loss, seed=cfg.seed,
            fpr95=artifacts.report.fpr95, auroc=artifacts.report.auroc,
            acc=artifacts.report.acc,
            mean_delta=_finite_mean([s.delta for s in artifacts.epoch_log]),
            mean_ch=_finite_mean([s.ch for s in artifacts.epoch_log]),
        ))

    aggregates: list[ComparisonAggregate] = []
    seen: list[tuple[str, str]] = []
    for row in rows:
        key = (row.strategy, row.loss)
        if key in seen:
            continue
        seen.append(key)
        group = [r for r in rows if (r.strategy, r.loss) == key]

        def agg(attr):
            vals = np.array([getattr(r, attr) for r in group])
            mean = float(np.mean(vals))
            std = float(np.std(vals)) if len(group) > 1 else None
            return mean, std

        f_m, f_s = agg("fpr95")
        a_m, a_s = agg("auroc")
        c_m, c_s = agg("acc")
        aggregates.append(ComparisonAggregate(
            strategy=key[0], loss=key[1], n_runs=len(group),
            fpr95_mean=f_m, fpr95_std=f_s, auroc_mean=a_m, auroc_std=a_s,
            acc_mean=c_m, acc_std=c_s,
        ))

    result = ComparisonResult(rows=rows, aggregates=aggregates)
    if out_dir is not None:
        _write_comparison(result, out_dir)
    return result


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_comparison(result: ComparisonResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "comparison.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "strategy", "loss", "seed", "fpr95", "auroc", "acc",
                         "mean_delta", "mean_ch", "n_runs", "fpr95_std", "auroc_std",
                         "acc_std"])
        for r in result.rows:
            writer.writerow(["run", r.strategy, r.loss, r.seed, _fmt(r.fpr95),
                             _fmt(r.auroc), _fmt(r.acc), _fmt(r.mean_delta),
                             _fmt(r.mean_ch), "", "", "", ""])
        for a in result.aggregates:
            writer.writerow(["aggregate", a.strategy, a.loss, "", _fmt(a.fpr95_mean),
                             _fmt(a.auroc_mean), _fmt(a.acc_mean), "", "",
                             a.n_runs, _fmt(a.fpr95_std), _fmt(a.auroc_std),
                             _fmt(a.acc_std)])
    with open(os.path.join(out_dir, "comparison.json"), "w") as fh:
        json.dump(
            {
                "runs": [dataclasses.asdict(r) for r in result.rows],
                "aggregates": [dataclasses.asdict(a) for a in result.aggregates],
            },
            fh, sort_keys=True,
        )
        fh.write("\n")


def cluster_histogram(pool, k: int, model: mdl.MlpModel | None = None,
                      features=None, scores=None, m: int = 64, seed: int = 0,
                      strategies=("random", "greedy", "biased", "uniform", "dos"),
                      feature_mode: str = "normalized",
                      out_path: str | None = None) -> dict[str, np.ndarray]:
    """Per-cluster selection counts for each strategy over one scored pool.

    Either a model (which supplies penultimate features and absent-category
    scores) or explicit features+scores must be given.
    """
    pool = check_finite(pool, "pool")
    n_classes = None
    if model is not None:
        logits, features = mdl.forward(model, pool)
        n_classes = logits.shape[1] - 1
        scores = absent_category_scores(logits, n_classes)
    if features is None or scores is None:
        raise ConfigError("cluster_histogram needs a model or explicit features and scores")
    feats = normalize_rows(features) if feature_mode == "normalized" else np.asarray(features)
    clusters = kmeans_normalized(feats, k, child_rng(seed, STREAM_KMEANS, 0), normalize=False)
    candidates = CandidateBatch(features=feats,
                                source_indices=np.arange(pool.shape[0]),
                                scores=np.asarray(scores, dtype=np.float64))
    counts: dict[str, np.ndarray] = {}
    for i, strategy in enumerate(strategies):
        rng = child_rng(seed, STREAM_SAMPLE, i)
        if strategy == "random":
            sel = sample_random(candidates, m, rng)
        elif strategy == "greedy":
            sel = sample_greedy(candidates, m)
        elif strategy == "biased":
            sel = sample_biased(candidates, clusters, m, rng)
        elif strategy == "uniform":
            sel = sample_uniform_clusters(candidates, clusters, m, rng)
        elif strategy == "dos":
            sel = sample_dos(candidates, clusters)
        else:
            raise ConfigError(f"unknown strategy {strategy!r}")
        counts[strategy] = np.bincount(clusters.assignments[sel.indices], minlength=k)
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy", "cluster_id", "count"])
            for strategy, arr in counts.items():
                for cid, count in enumerate(arr):
                    writer.writerow([strategy, cid, int(count)])
    return counts
