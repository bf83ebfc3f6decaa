"""End-to-end pipeline stages behind the CLI.

Artifacts live under one output directory:
  data/       PPM images + JSON manifests (synthetic source only)
  models/     classifier checkpoint, neuron ranges, energy calibration
  detectors/  per-seed detector banks and logistic calibrations
  reports/    cross-dataset and perturbation tables (CSV + JSON)
  plots/      SVG confidence-vs-magnitude curves
  explain/    rendered pattern references

Datasets come either from the synthetic generator (images + classifier) or
from FARC feature archives (features + logits exported elsewhere); in the
latter case only detector training, calibration and cross-dataset evaluation
are available.
"""

import copy
import json
import os
from dataclasses import dataclass

import numpy as np

from . import baselines, calibration, classifier, detectors, explain, farc
from . import metrics, perturb, ppm, reports, synth
from .errors import ArtifactError, ConfigError, DegenerateInput, MagnitudeError

METRIC_NAMES = ("auroc", "aupr", "fpr80")

DEFAULT_CONFIG = {
    "out": "runs/synth",
    "seed": 0,
    "seeds": 3,
    "dataset": {
        "source": "synthetic",
        "classes": 3,
        "train_per_class": 80,
        "test_per_class": 20,
        "ood_count": 60,
        "archives": {"train": "", "test": "", "ood": ""},
    },
    "classifier": {
        "epochs": 30,
        "learning_rate": 1e-3,
        "optimizer": "adaptive",
        "batch_size": 16,
    },
    "detectors": {
        # Library defaults keep the full-scale recipe (30 epochs, decay
        # 1e-5); the bench trains longer and with a stronger decay because
        # 240 desk-scale maps give few optimizer steps per epoch and the
        # decay keeps the locality objective from saturating early.
        "p": 4,
        "modes": ["vanilla", "class_based"],
        "epochs": 600,
        "learning_rate": 1e-4,
        "weight_decay": 3e-3,
        "unicity_weight": 1.0,
    },
    "perturbations": {
        "kinds": list(perturb.KINDS),
        "grids": {k: list(v) for k, v in perturb.DEFAULT_GRIDS.items()},
    },
    "explain": {"mode": "vanilla", "top_k": 3, "samples": 16, "noise_std": 0.1},
}


def merge_config(user=None):
    """Defaults overlaid with a user document, then validated."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)

    def deep_update(dst, src):
        for key, val in src.items():
            if key not in dst:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(dst[key], dict):
                if not isinstance(val, dict):
                    raise ConfigError(f"config key {key!r} must be an object")
                deep_update(dst[key], val)
            else:
                dst[key] = val

    if user:
        deep_update(cfg, user)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg["seeds"] < 1:
        raise ConfigError("seeds must be >= 1")
    det = cfg["detectors"]
    if det["p"] not in (4, 6):
        raise ConfigError("detector count p must be 4 or 6")
    if not det["modes"] or any(m not in ("vanilla", "class_based")
                               for m in det["modes"]):
        raise ConfigError("detector modes must be a non-empty subset of "
                          "vanilla/class_based")
    ds = cfg["dataset"]
    if ds["source"] not in ("synthetic", "feature-archive"):
        raise ConfigError(f"unknown dataset source {ds['source']!r}")
    if ds["source"] == "synthetic" and ds["classes"] < 2:
        raise ConfigError("need at least 2 classes")
    pert = cfg["perturbations"]
    for kind in pert["kinds"]:
        if kind not in perturb.KINDS:
            raise ConfigError(f"unknown perturbation kind {kind!r}")
        try:
            grid_for(cfg, kind)
        except MagnitudeError as exc:
            raise ConfigError(f"bad grid for {kind}: {exc}") from exc
    if cfg["explain"]["mode"] not in ("vanilla", "class_based"):
        raise ConfigError("explain mode must be vanilla or class_based")


def grid_for(cfg, kind):
    return perturb.MagnitudeGrid(kind=kind, values=tuple(cfg["perturbations"]["grids"][kind]))


def detector_seeds(cfg):
    return [cfg["seed"] + i for i in range(cfg["seeds"])]


@dataclass
class Paths:
    root: str

    def __post_init__(self):
        self.data = os.path.join(self.root, "data")
        self.models = os.path.join(self.root, "models")
        self.detectors = os.path.join(self.root, "detectors")
        self.reports = os.path.join(self.root, "reports")
        self.plots = os.path.join(self.root, "plots")
        self.explain = os.path.join(self.root, "explain")

    def ensure(self, *dirs):
        for d in dirs:
            os.makedirs(d, exist_ok=True)

    def manifest(self, part):
        return os.path.join(self.data, f"{part}.json")

    def classifier_file(self):
        return os.path.join(self.models, "classifier.tcnn")

    def ranges_file(self):
        return os.path.join(self.models, "ranges.json")

    def energy_cal_file(self):
        return os.path.join(self.models, "energy_cal.json")

    def bank_file(self, mode, seed):
        return os.path.join(self.detectors, f"{mode}_s{seed}.pbnk")

    def cal_file(self, mode, seed):
        return os.path.join(self.detectors, f"{mode}_s{seed}.pcal")


def _require(path, what):
    if not os.path.exists(path):
        raise ArtifactError(f"missing {what}: {path} (run the earlier stages)")
    return path


# ---------------------------------------------------------------- datasets

def _write_image_set(paths, part, images, manifest):
    out_dir = os.path.join(paths.data, part)
    paths.ensure(out_dir)
    for image_id, image in zip(manifest.ids, images):
        ppm.write_ppm(os.path.join(out_dir, f"{image_id}.ppm"), image)
    with open(paths.manifest(part), "w") as f:
        f.write(manifest.to_json())


def load_image_set(paths, part):
    man_path = _require(paths.manifest(part), f"{part} manifest")
    with open(man_path) as f:
        manifest = synth.DatasetManifest.from_json(f.read())
    images = []
    for image_id in manifest.ids:
        img_path = _require(os.path.join(paths.data, part, f"{image_id}.ppm"),
                            f"{part} image")
        images.append(ppm.read_ppm(img_path))
    return images, manifest


def featurize(model, images):
    """(feature map, logits) pairs for every image."""
    return [classifier.forward(model, x) for x in images]


def _farc_samples(path, what):
    archive = farc.read_farc(_require(path, what))
    samples = [(f.astype(np.float64), l.astype(np.float64))
               for f, l in zip(archive.fmaps, archive.logits)]
    return samples, archive.labels


def _load_split_samples(cfg, paths, split):
    """Samples for train/test/ood under either dataset source."""
    ds = cfg["dataset"]
    if ds["source"] == "feature-archive":
        path = ds["archives"].get(split, "")
        if not path:
            raise ConfigError(f"dataset.archives.{split} is not set")
        return _farc_samples(path, f"{split} feature archive")
    model = classifier.load_model(_require(paths.classifier_file(), "classifier"))
    images, manifest = load_image_set(paths, split)
    return featurize(model, images), list(manifest.labels)


# ------------------------------------------------------------------ stages

def stage_gen_data(cfg, paths):
    ds = cfg["dataset"]
    if ds["source"] != "synthetic":
        raise ConfigError("gen-data only applies to the synthetic source")
    seed = cfg["seed"]
    paths.ensure(paths.data)
    train_images, train_man = synth.gen_synth(ds["classes"], ds["train_per_class"],
                                              seed, split="train")
    test_images, test_man = synth.gen_synth(ds["classes"], ds["test_per_class"],
                                            seed, split="test")
    ood_images, ood_man = synth.gen_synth_ood(ds["ood_count"], seed, split="test")
    _write_image_set(paths, "train", train_images, train_man)
    _write_image_set(paths, "test", test_images, test_man)
    _write_image_set(paths, "ood", ood_images, ood_man)
    return {"train": len(train_images), "test": len(test_images),
            "ood": len(ood_images)}


def stage_train_classifier(cfg, paths):
    if cfg["dataset"]["source"] != "synthetic":
        raise ConfigError("train-classifier only applies to the synthetic source")
    images, manifest = load_image_set(paths, "train")
    ccfg = cfg["classifier"]
    train_cfg = classifier.ClassifierTrainConfig(
        epochs=ccfg["epochs"], learning_rate=ccfg["learning_rate"],
        optimizer=ccfg["optimizer"], batch_size=ccfg["batch_size"],
        seed=cfg["seed"],
    )
    model = classifier.train_classifier(images, manifest.labels, train_cfg)
    paths.ensure(paths.models)
    classifier.save_model(model, paths.classifier_file())
    ranges = classifier.fit_neuron_ranges(model, images)
    _save_ranges(paths.ranges_file(), ranges)
    acc = classifier.accuracy(model, images, manifest.labels)
    reports.write_json(os.path.join(paths.models, "classifier_meta.json"),
                       {"train_accuracy": acc})
    return {"train_accuracy": acc}


def _save_ranges(path, ranges):
    reports.write_json(path, {"mins": list(ranges.mins), "maxs": list(ranges.maxs)})


def _load_ranges(path):
    with open(_require(path, "neuron ranges")) as f:
        d = json.load(f)
    return classifier.NeuronRanges(mins=np.array(d["mins"]), maxs=np.array(d["maxs"]))


def stage_train_detectors(cfg, paths):
    samples, labels = _load_split_samples(cfg, paths, "train")
    fmaps = [s[0] for s in samples]
    det = cfg["detectors"]
    n_classes = max(labels) + 1 if labels else 0
    paths.ensure(paths.detectors)
    trained = []
    for seed in detector_seeds(cfg):
        dcfg = detectors.DetectorTrainConfig(
            epochs=det["epochs"], learning_rate=det["learning_rate"],
            weight_decay=det["weight_decay"], unicity_weight=det["unicity_weight"],
            seed=seed,
        )
        for mode in det["modes"]:
            if mode == "vanilla":
                bank = detectors.train_vanilla(fmaps, det["p"], dcfg)
            else:
                bank = detectors.train_class_based(fmaps, labels, n_classes,
                                                   det["p"], dcfg)
            detectors.save_bank(bank, paths.bank_file(mode, seed))
            trained.append(f"{mode}_s{seed}")
    return {"banks": trained}


def stage_calibrate(cfg, paths):
    samples, labels = _load_split_samples(cfg, paths, "train")
    fmaps = [s[0] for s in samples]
    logits = [s[1] for s in samples]
    calibrated = []
    for seed in detector_seeds(cfg):
        for mode in cfg["detectors"]["modes"]:
            bank = detectors.load_bank(_require(paths.bank_file(mode, seed),
                                                f"{mode} bank (seed {seed})"))
            cal = calibration.calibrate_bank(
                bank, fmaps, labels=labels if mode == "class_based" else None)
            calibration.save_calibration(cal, paths.cal_file(mode, seed))
            calibrated.append(f"{mode}_s{seed}")
    paths.ensure(paths.models)
    mu, sigma = baselines.fit_energy_calibration(logits)
    reports.write_json(paths.energy_cal_file(), {"mu": mu, "sigma": sigma})
    if cfg["dataset"]["source"] == "feature-archive":
        # No classifier stage ran, so fit the fNRD ranges from the archive.
        acts = np.stack([_monitored(f, l) for f, l in samples])
        _save_ranges(paths.ranges_file(),
                     classifier.NeuronRanges(mins=acts.min(axis=0),
                                             maxs=acts.max(axis=0)))
    return {"calibrations": calibrated}


def _monitored(fmap, logits):
    return np.concatenate([classifier.global_max_pool(fmap), logits])


def _measure_names(cfg):
    modes = cfg["detectors"]["modes"]
    names = []
    if "vanilla" in modes:
        names.append("vP")
    if "class_based" in modes:
        names.append("cP")
    names.extend(["MCP", "EB", "FNRD"])
    return names


def _scorers_for_seed(cfg, paths, seed, calibrated_energy):
    """Confidence callables over (fmap, logits) samples for one detector seed."""
    ranges = _load_ranges(paths.ranges_file())
    with open(_require(paths.energy_cal_file(), "energy calibration")) as f:
        ecal = json.load(f)
    scorers = {}
    modes = cfg["detectors"]["modes"]
    if "vanilla" in modes:
        bank_v = detectors.load_bank(_require(paths.bank_file("vanilla", seed),
                                              f"vanilla bank (seed {seed})"))
        cal_v = calibration.load_calibration(
            _require(paths.cal_file("vanilla", seed),
                     f"vanilla calibration (seed {seed})"))
        scorers["vP"] = lambda s: calibration.vanilla_confidence(s[0], bank_v, cal_v)
    if "class_based" in modes:
        bank_c = detectors.load_bank(_require(paths.bank_file("class_based", seed),
                                              f"class bank (seed {seed})"))
        cal_c = calibration.load_calibration(
            _require(paths.cal_file("class_based", seed),
                     f"class calibration (seed {seed})"))
        scorers["cP"] = lambda s: calibration.class_confidence(s[0], s[1],
                                                               bank_c, cal_c)
    scorers["MCP"] = lambda s: baselines.mcp_confidence(s[1])
    if calibrated_energy:
        scorers["EB"] = lambda s: baselines.calibrated_energy_confidence(
            s[1], ecal["mu"], ecal["sigma"])
    else:
        scorers["EB"] = lambda s: baselines.energy_confidence(s[1])
    scorers["FNRD"] = lambda s: baselines.fnrd_confidence(_monitored(s[0], s[1]),
                                                          ranges)
    return scorers


def _mean_std(values):
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else None
    return mean, std


def stage_eval_cross(cfg, paths):
    iod_samples, _ = _load_split_samples(cfg, paths, "test")
    ood_samples, _ = _load_split_samples(cfg, paths, "ood")
    iod_name, ood_name = _dataset_names(cfg, paths)

    per_measure = {m: [] for m in _measure_names(cfg)}
    for seed in detector_seeds(cfg):
        scorers = _scorers_for_seed(cfg, paths, seed, calibrated_energy=False)
        for name in per_measure:
            report = metrics.cross_dataset_eval(scorers[name], iod_samples,
                                                ood_samples)
            per_measure[name].append(report)

    rows = []
    for name in per_measure:
        for metric in METRIC_NAMES:
            values = [getattr(r, metric) for r in per_measure[name]]
            mean, std = _mean_std(values)
            rows.append([name, iod_name, ood_name, metric, mean, std])
    paths.ensure(paths.reports)
    reports.write_csv(os.path.join(paths.reports, "cross.csv"),
                      ["measure", "iod", "ood", "metric", "mean", "std"], rows)
    reports.write_json(os.path.join(paths.reports, "cross.json"), {
        "rows": [dict(zip(["measure", "iod", "ood", "metric", "mean", "std"], r))
                 for r in rows]
    })
    return {"rows": len(rows)}


def _dataset_names(cfg, paths):
    if cfg["dataset"]["source"] == "feature-archive":
        return "iod-archive", "ood-archive"
    return "synthetic-shapes", "synthetic-shapes-ood"


def stage_eval_perturb(cfg, paths):
    if cfg["dataset"]["source"] != "synthetic":
        raise ConfigError("eval-perturb needs images; not available for "
                          "feature archives")
    model = classifier.load_model(_require(paths.classifier_file(), "classifier"))
    images, _ = load_image_set(paths, "test")
    measure_names = _measure_names(cfg)
    seeds = detector_seeds(cfg)
    scorers_by_seed = {
        seed: _scorers_for_seed(cfg, paths, seed, calibrated_energy=True)
        for seed in seeds
    }

    rows = []
    plot_data = {}
    for kind in cfg["perturbations"]["kinds"]:
        grid = grid_for(cfg, kind)
        # Featurize each perturbed dataset once; every measure reuses it.
        sweeps = {name: {seed: [] for seed in seeds} for name in measure_names}
        for lam in grid.values:
            perturbed = perturb.perturb_dataset(kind, lam, images,
                                                seed=cfg["seed"])
            samples = featurize(model, perturbed)
            for name in measure_names:
                for seed in seeds:
                    scores = [scorers_by_seed[seed][name](s) for s in samples]
                    sweeps[name][seed].append(float(np.mean(scores)))
        for name in measure_names:
            per_seed_rs = []
            for seed in seeds:
                gammas = np.array(sweeps[name][seed])
                try:
                    r_s = metrics.spearman(
                        np.arange(len(gammas), dtype=np.float64), gammas)
                except DegenerateInput:
                    r_s = None
                per_seed_rs.append(r_s)
            if any(r is None for r in per_seed_rs):
                rs_mean, rs_std = "undefined", None
            else:
                rs_mean, rs_std = _mean_std(per_seed_rs)
            gamma_mean = np.mean(
                [sweeps[name][seed] for seed in seeds], axis=0)
            plot_data.setdefault(kind, {})[name] = list(gamma_mean)
            for lam, g in zip(grid.values, gamma_mean):
                rows.append([name, kind, lam, float(g), rs_mean, rs_std])

    paths.ensure(paths.reports, paths.plots)
    header = ["measure", "perturbation", "lambda", "gamma",
              "spearman_mean", "spearman_std"]
    reports.write_csv(os.path.join(paths.reports, "perturb.csv"), header, rows)
    reports.write_json(os.path.join(paths.reports, "perturb.json"),
                       {"rows": [dict(zip(header, r)) for r in rows]})
    for kind, series in plot_data.items():
        labels = [f"{v:g}" for v in grid_for(cfg, kind).values]
        reports.svg_line_plot(
            os.path.join(paths.plots, f"perturb_{kind}.svg"),
            labels, series, title=f"Mean confidence vs {kind}",
            x_title="magnitude", y_title="mean confidence")
    return {"rows": len(rows)}


def stage_explain(cfg, paths):
    if cfg["dataset"]["source"] != "synthetic":
        raise ConfigError("explain needs images; not available for "
                          "feature archives")
    model = classifier.load_model(_require(paths.classifier_file(), "classifier"))
    images, manifest = load_image_set(paths, "train")
    ecfg = cfg["explain"]
    mode = ecfg["mode"]
    seed = cfg["seed"]
    bank = detectors.load_bank(_require(paths.bank_file(mode, seed),
                                        f"{mode} bank (seed {seed})"))
    cal = calibration.load_calibration(_require(paths.cal_file(mode, seed),
                                                f"{mode} calibration (seed {seed})"))
    refs = explain.pattern_references(bank, cal, model, images, ecfg["top_k"],
                                      n=ecfg["samples"],
                                      noise_std=ecfg["noise_std"], seed=seed)
    paths.ensure(paths.explain)
    index = []
    for ref in refs:
        for rank, entry in enumerate(ref.entries):
            name = f"detector_{ref.class_index}_{ref.detector_index}_{rank}.ppm"
            explain.render_saliency(images[entry.image_index], entry.saliency,
                                    os.path.join(paths.explain, name))
            index.append({
                "file": name,
                "class": ref.class_index,
                "detector": ref.detector_index,
                "rank": rank,
                "image_id": manifest.ids[entry.image_index],
                "score": entry.score,
                "confidence": entry.confidence,
            })
    reports.write_json(os.path.join(paths.explain, "references.json"),
                       {"references": index})
    return {"files": len(index)}


def stage_all(cfg, paths):
    result = {}
    if cfg["dataset"]["source"] == "synthetic":
        result["gen_data"] = stage_gen_data(cfg, paths)
        result["train_classifier"] = stage_train_classifier(cfg, paths)
    result["train_detectors"] = stage_train_detectors(cfg, paths)
    result["calibrate"] = stage_calibrate(cfg, paths)
    result["eval_cross"] = stage_eval_cross(cfg, paths)
    if cfg["dataset"]["source"] == "synthetic":
        result["eval_perturb"] = stage_eval_perturb(cfg, paths)
        result["explain"] = stage_explain(cfg, paths)
    return result
