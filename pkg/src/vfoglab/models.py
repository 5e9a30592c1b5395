"""The fog classifier and the cost forecaster: training pipelines, queries, bundles.

Fog classifier: (position, time) -> serving fog, an MLP with three hidden
layers of 100 sigmoid units and a softmax over F fogs plus a no-coverage
class. Cost forecaster: the last `window` interaction steps -> next scaled
cost, two stacked LSTM layers feeding a 20-unit sigmoid layer and a linear
output.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import evaluation, features
from .fogsim import NO_COVERAGE, FogNetwork
from .nncore import MLP, LstmRegressor, TrainConfig, build, train
from .nncore.serialize import encode_params, load_params
from .seeding import derive_seed, rng_for

BUNDLE_FORMAT = "vfoglab-bundle"
BUNDLE_VERSION = 1


class BundleError(ValueError):
    pass


@dataclass
class FogModelConfig:
    hidden: tuple = (100, 100, 100)
    split: tuple = (0.7, 0.15, 0.15)
    epoch_weekday: int = 0
    train: TrainConfig = field(default_factory=lambda: TrainConfig(max_epochs=3000, patience=50, lr=1e-3))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        for k in ("hidden", "split"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class CostModelConfig:
    hidden: tuple = (32, 32)
    head: tuple = (20,)
    window: int = features.DEFAULT_WINDOW
    split: tuple = (0.7, 0.15, 0.15)
    epoch_weekday: int = 0
    train: TrainConfig = field(default_factory=lambda: TrainConfig(max_epochs=3000, patience=50, lr=1e-3))
    # windowless comparison model on the most recent step only
    baseline_hidden: tuple = (64, 20)
    train_baseline: bool = True

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "train" in d:
            d["train"] = TrainConfig(**d["train"])
        for k in ("hidden", "head", "split", "baseline_hidden"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------- fog predictor


@dataclass
class FogPredictor:
    net: MLP
    scaler: features.FeatureScaler
    network: FogNetwork
    epoch_weekday: int = 0

    @property
    def n_fogs(self):
        return len(self.network)

    @property
    def no_coverage_class(self):
        return self.n_fogs

    def class_labels(self):
        return [str(k) for k in range(self.n_fogs)] + ["NO_COVERAGE"]

    def features(self, lats, lons, timestamps):
        return features.fog_features(self.scaler, lats, lons, timestamps, self.epoch_weekday)

    def predict_proba(self, lats, lons, timestamps):
        return self.net.predict(self.features(lats, lons, timestamps))

    def predict_classes(self, lats, lons, timestamps):
        return self.predict_proba(lats, lons, timestamps).argmax(axis=1)

    def class_to_fog_id(self, cls):
        return NO_COVERAGE if int(cls) == self.n_fogs else int(cls)


def predict_fog(predictor, position, timestamp):
    """(class index, probability vector) for one (lat, lon) at a timestamp."""
    lat, lon = position
    probs = predictor.predict_proba([lat], [lon], [timestamp])[0]
    return int(np.argmax(probs)), probs


def fog_labels(records, n_fogs):
    return np.array([features.fog_label(r, n_fogs) for r in records], dtype=np.int64)


def fog_split(records, n_fogs, ratios, seed):
    return features.split_indices(len(records), ratios, derive_seed(seed, "fog-split"),
                                  strata=fog_labels(records, n_fogs))


def train_fog_predictor(records, network, config=None, seed=0, min_classes=2):
    """Split (stratified), scale on train, train the MLP; returns (predictor, report)."""
    config = config or FogModelConfig()
    n_fogs = len(network)
    labels = fog_labels(records, n_fogs)
    if len(np.unique(labels)) < min_classes:
        raise ValueError(f"fog predictor needs at least {min_classes} classes in the data")
    tr, va, te = fog_split(records, n_fogs, config.split, seed)
    scaler = features.fit_scaler([records[i] for i in tr])
    ds = features.build_fog_dataset(records, scaler, n_fogs, config.epoch_weekday)
    d_tr, d_va, d_te = ds.subset(tr), ds.subset(va), ds.subset(te)
    sizes = (len(features.FOG_FEATURES),) + tuple(config.hidden) + (n_fogs + 1,)
    net = MLP(sizes, "sigmoid", "softmax", "ce", rng=rng_for(seed, "fog-init"))
    _, hist = train(net, (d_tr.X, d_tr.targets), (d_va.X, d_va.targets) if len(d_va) else None,
                    config.train, derive_seed(seed, "fog-train"))
    predictor = FogPredictor(net, scaler, network, config.epoch_weekday)
    report = {"sizes": {"train": len(tr), "val": len(va), "test": len(te)}, "history": hist.to_dict()}
    for name, part in (("train", d_tr), ("val", d_va), ("test", d_te)):
        if len(part):
            pred = net.predict(part.X).argmax(axis=1)
            acc, cm = evaluation.accuracy_and_confusion(pred, part.labels, n_fogs + 1)
            report[f"{name}_accuracy"] = acc
            if name == "test":
                report["confusion_matrix"] = cm.to_list()
    report["class_labels"] = predictor.class_labels()
    report["reference"] = {"paper_test_accuracy": evaluation.REFERENCE_VALUES["fog_accuracy_ffnn"]}
    return predictor, report


# --------------------------------------------------------------- cost predictor


@dataclass
class CostPredictor:
    net: LstmRegressor
    scaler: features.FeatureScaler
    network: FogNetwork
    window: int = features.DEFAULT_WINDOW
    epoch_weekday: int = 0

    def predict_scaled(self, X, mask):
        return self.net.predict((np.asarray(X, dtype=float), np.asarray(mask, dtype=float)))

    def to_ms(self, scaled):
        return self.scaler.inverse_transform(np.asarray(scaled), ["cost_ms"])


def predict_cost(predictor, window):
    """Scaled and millisecond cost for a CostWindow/CostWindowSet or an (X, mask) pair."""
    if isinstance(window, tuple):
        X, mask = window
    else:
        X, mask = window.steps if hasattr(window, "steps") else window.X, window.mask
    X = np.asarray(X, dtype=float)
    mask = np.asarray(mask, dtype=float)
    single = X.ndim == 2
    if single:
        X, mask = X[None], mask[None]
    scaled = predictor.predict_scaled(X, mask)
    ms = predictor.to_ms(scaled)
    if single:
        return float(scaled[0]), float(ms[0])
    return scaled, ms


def cost_split(spans, ratios, seed):
    return features.split_indices(len(spans), ratios, derive_seed(seed, "cost-split"))


def _target_records(spans, idx):
    # windows overlap, so step records of a training window can be targets of
    # held-out windows; only training targets feed the scaler
    return sorted({spans[k][0] for k in idx})


def prepare_cost_data(records, config, seed):
    """Windows, split indices and a scaler fitted on training targets only."""
    spans = features.window_spans(records, config.window)
    if not spans:
        raise ValueError("no usable cost windows (need >= 2 covered records per vehicle)")
    tr, va, te = cost_split(spans, config.split, seed)
    scaler = features.fit_scaler([records[i] for i in _target_records(spans, tr)])
    windows = features.build_cost_windows(records, scaler, config.window, config.epoch_weekday, spans)
    return windows, (tr, va, te), scaler


def train_cost_predictor(records, network, config=None, seed=0):
    """Windowed pipeline + stacked-LSTM training; returns (predictor, report)."""
    config = config or CostModelConfig()
    windows, (tr, va, te), scaler = prepare_cost_data(records, config, seed)
    w_tr, w_va, w_te = windows.subset(tr), windows.subset(va), windows.subset(te)
    net = LstmRegressor(len(features.STEP_FEATURES), config.hidden, config.head, "sigmoid",
                        rng=rng_for(seed, "cost-init"))
    val = ((w_va.X, w_va.mask), w_va.y) if len(w_va) else None
    _, hist = train(net, ((w_tr.X, w_tr.mask), w_tr.y), val, config.train, derive_seed(seed, "cost-train"))
    predictor = CostPredictor(net, scaler, network, config.window, config.epoch_weekday)
    report = {"sizes": {"train": len(tr), "val": len(va), "test": len(te)}, "history": hist.to_dict()}
    for name, part in (("train", w_tr), ("val", w_va), ("test", w_te)):
        if len(part):
            pred = predictor.predict_scaled(part.X, part.mask)
            report[f"{name}_mae_scaled"] = evaluation.mae(pred, part.y)
            report[f"{name}_mae_ms"] = evaluation.mae(predictor.to_ms(pred), predictor.to_ms(part.y))
    if config.train_baseline:
        base = train_windowless_baseline(w_tr, w_va, config, seed)
        report["baseline_ffnn_test_mae_scaled"] = evaluation.mae(base.predict(w_te.last_step)[:, 0], w_te.y)
    report["reference"] = {"paper_lstm_mae": evaluation.REFERENCE_VALUES["cost_mae_lstm"],
                           "paper_ffnn_mae": evaluation.REFERENCE_VALUES["cost_mae_ffnn"]}
    return predictor, report


def train_windowless_baseline(w_tr, w_va, config, seed):
    """Feed-forward regressor on the most recent step of each window."""
    sizes = (len(features.STEP_FEATURES),) + tuple(config.baseline_hidden) + (1,)
    net = MLP(sizes, "sigmoid", "linear", "mae", rng=rng_for(seed, "baseline-init"))
    val = (w_va.last_step, w_va.y[:, None]) if len(w_va) else None
    train(net, (w_tr.last_step, w_tr.y[:, None]), val, config.train, derive_seed(seed, "baseline-train"))
    return net


# ---------------------------------------------------------------------- bundles


@dataclass
class ModelBundle:
    fog: FogPredictor | None = None
    cost: CostPredictor | None = None
    meta: dict = field(default_factory=dict)


def _payload(bundle):
    payload = {"meta": bundle.meta}
    net_src = bundle.fog or bundle.cost
    if net_src is None:
        raise BundleError("bundle holds no models")
    payload["fog_network"] = net_src.network.to_list()
    if bundle.fog is not None:
        payload["fog"] = {
            "net": bundle.fog.net.spec(),
            "params": encode_params(bundle.fog.net),
            "layout": features.layout_document(bundle.fog.scaler, features.DEFAULT_WINDOW,
                                               bundle.fog.epoch_weekday),
            "class_labels": bundle.fog.class_labels(),
        }
    if bundle.cost is not None:
        payload["cost"] = {
            "net": bundle.cost.net.spec(),
            "params": encode_params(bundle.cost.net),
            "layout": features.layout_document(bundle.cost.scaler, bundle.cost.window,
                                               bundle.cost.epoch_weekday),
        }
    return payload


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_bundle(bundle, path):
    """Write a versioned, checksummed JSON bundle (parameters as base64 float64)."""
    if not path:
        raise BundleError("empty bundle path")
    body = _canonical(_payload(bundle))
    doc = {"format": BUNDLE_FORMAT, "version": BUNDLE_VERSION,
           "sha256": hashlib.sha256(body.encode()).hexdigest(), "payload": json.loads(body)}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=1))
        fh.write("\n")


def load_bundle(path):
    if not path:
        raise BundleError("empty bundle path")
    if not os.path.exists(path):
        raise BundleError(f"bundle not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleError(f"bundle is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != BUNDLE_FORMAT:
        raise BundleError("not a model bundle")
    if doc.get("version") != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version {doc.get('version')!r}")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or hashlib.sha256(_canonical(payload).encode()).hexdigest() != doc.get("sha256"):
        raise BundleError("bundle checksum mismatch (corrupted or edited file)")
    try:
        network = FogNetwork.from_list(payload["fog_network"])
        bundle = ModelBundle(meta=payload.get("meta", {}))
        if "fog" in payload:
            sec = payload["fog"]
            net = build(sec["net"])
            load_params(net, sec["params"])
            scaler, _, wd = features.load_layout(sec["layout"])
            bundle.fog = FogPredictor(net, scaler, network, wd)
        if "cost" in payload:
            sec = payload["cost"]
            net = build(sec["net"])
            load_params(net, sec["params"])
            scaler, window, wd = features.load_layout(sec["layout"])
            bundle.cost = CostPredictor(net, scaler, network, window, wd)
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"malformed bundle: {exc}") from None
    return bundle
