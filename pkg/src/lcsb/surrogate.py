"""Learning-curve surrogate: SVD compression + mean model + noise model.

A fitted SurrogateModel answers two kinds of query. ``query_mean`` decodes
the mean model's predicted coefficients. ``query_noisy`` adds a sample
from the noise model. The noisy curve for a given (architecture, seed)
is generated in full and then sliced, so prefixes of different lengths
always agree.

Surrogates persist to a single `.lcsm` file: magic bytes, a JSON header,
length-prefixed little-endian array sections and a CRC-32 trailer.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import noise as noise_mod
from . import regress
from .core import Architecture, CurveDataset, SearchSpaceSpec, encode_matrix, substream
from .lowrank import DEFAULT_K, DEFAULT_K_MAX, SvdBasis, compress, decompress, rank_mse_profile, truncated_svd

MAGIC = b"LCSM\x00\r\n\x1a"
FORMAT_VERSION = 1
AUGMENTATIONS = ("none", "anchor_epochs", "first_n_epochs")


class SurrogateFormatError(ValueError):
    pass


class ChecksumError(SurrogateFormatError):
    pass


@dataclass(frozen=True)
class SurrogateConfig:
    # None: select_rank when repeated seeds exist, else DEFAULT_K; "auto": select_rank or fail
    k: int | str | None = None
    mu: regress.RegressorConfig = field(default_factory=regress.RegressorConfig)
    noise_kind: str = "std"
    augmentation: str = "none"
    anchor_epochs: tuple[int, ...] = ()
    first_n: int = 0
    version: str = "1.0"
    rng_seed: int = 0
    k_max: int = DEFAULT_K_MAX
    val_fraction: float = 0.2
    window_regressor: regress.RegressorConfig = noise_mod.DEFAULT_WINDOW_REGRESSOR

    def __post_init__(self):
        object.__setattr__(self, "anchor_epochs", tuple(int(e) for e in self.anchor_epochs))
        if self.k not in (None, "auto") and not (isinstance(self.k, int) and self.k >= 1):
            raise ValueError("k must be a positive integer, 'auto' or None")
        if self.noise_kind not in noise_mod.KINDS:
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.augmentation not in AUGMENTATIONS:
            raise ValueError(f"unknown augmentation {self.augmentation!r}")
        if self.augmentation == "anchor_epochs" and not self.anchor_epochs:
            raise ValueError("anchor_epochs augmentation needs at least one epoch")
        if self.augmentation == "first_n_epochs" and self.first_n < 1:
            raise ValueError("first_n_epochs augmentation needs first_n >= 1")
        if not str(self.version):
            raise ValueError("version string must be non-empty")

    def aug_epochs(self) -> tuple[int, ...]:
        """1-indexed epochs whose accuracies are appended to the encoding."""
        if self.augmentation == "anchor_epochs":
            return self.anchor_epochs
        if self.augmentation == "first_n_epochs":
            return tuple(range(1, self.first_n + 1))
        return ()

    def check_space(self, e_max: int) -> None:
        bad = [e for e in self.aug_epochs() if not 1 <= e <= e_max]
        if bad:
            raise ValueError(f"augmentation epochs {bad} outside [1, {e_max}]")

    def to_dict(self) -> dict:
        return {
            "k": self.k, "mu": self.mu.to_dict(), "noise_kind": self.noise_kind,
            "augmentation": self.augmentation, "anchor_epochs": list(self.anchor_epochs),
            "first_n": self.first_n, "version": self.version, "rng_seed": self.rng_seed,
            "k_max": self.k_max, "val_fraction": self.val_fraction,
            "window_regressor": self.window_regressor.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateConfig":
        d = dict(d)
        for key in ("mu", "window_regressor"):
            if key in d:
                d[key] = regress.RegressorConfig.from_dict(d[key])
        if "anchor_epochs" in d:
            d["anchor_epochs"] = tuple(d["anchor_epochs"])
        return cls(**d)


class SurrogateModel:
    def __init__(self, space: SearchSpaceSpec, basis: SvdBasis, mu: regress.FittedRegressor,
                 noise: noise_mod.NoiseModel, config: SurrogateConfig, fit_report: dict):
        if basis.e_max != space.e_max or noise.e_max != space.e_max:
            raise ValueError("component E_max values disagree with the space")
        if mu.d_out != basis.k:
            raise ValueError("mean model output size differs from basis rank")
        n_aug = len(config.aug_epochs())
        if mu.d_in != space.encoding_length + n_aug:
            raise ValueError("mean model input size differs from encoding + augmentation length")
        self.space = space
        self.basis = basis
        self.mu = mu
        self.noise = noise
        self.config = config
        self.fit_report = fit_report

    @property
    def n_aug(self) -> int:
        return len(self.config.aug_epochs())

    def features(self, archs, augmentation=None) -> np.ndarray:
        enc = encode_matrix(archs, self.space)
        if not self.n_aug:
            return enc
        if augmentation is None:
            raise ValueError(f"this surrogate needs {self.n_aug} augmentation accuracies per query")
        aug = np.asarray(augmentation, dtype=float).reshape(len(enc), -1)
        if aug.shape[1] != self.n_aug:
            raise ValueError(f"expected {self.n_aug} augmentation values, got {aug.shape[1]}")
        if np.any((aug < 0) | (aug > 1)):
            raise ValueError("augmentation accuracies must lie in [0, 1]")
        return np.hstack([enc, aug])

    def predict_coeffs(self, archs, augmentation=None) -> np.ndarray:
        return self.mu.predict(self.features(archs, augmentation))

    def mean_curves(self, archs, augmentation=None) -> np.ndarray:
        return decompress(self.predict_coeffs(archs, augmentation), self.basis)

    def query_mean(self, arch: Architecture, augmentation=None) -> np.ndarray:
        aug = None if augmentation is None else [augmentation]
        return self.mean_curves([arch], aug)[0]

    def noise_rng(self, arch: Architecture, seed: int) -> np.random.Generator:
        return substream(self.config.rng_seed, "query_noisy", int(seed) & 0xFFFFFFFF, *arch.ops)

    def noisy_curves(self, archs, seeds, augmentation=None) -> np.ndarray:
        """Full noisy curves, one per (arch, seed) pair."""
        feats = self.features(archs, augmentation)
        coeffs = self.mu.predict(feats)
        means = decompress(coeffs, self.basis)
        out = np.empty_like(means)
        for i, (a, s) in enumerate(zip(archs, seeds)):
            eps = self.noise.sample(feats[i], coeffs[i], self.noise_rng(a, s))
            out[i] = np.clip(means[i] + eps, 0.0, 1.0)
        return out

    def query_noisy(self, arch: Architecture, seed: int, up_to_epoch: int | None = None,
                    augmentation=None) -> np.ndarray:
        e = self.space.e_max if up_to_epoch is None else int(up_to_epoch)
        if not 1 <= e <= self.space.e_max:
            raise ValueError(f"up_to_epoch {e} outside [1, {self.space.e_max}]")
        aug = None if augmentation is None else [augmentation]
        return self.noisy_curves([arch], [seed], aug)[0, :e].copy()


def _aug_values(curves: np.ndarray, epochs) -> np.ndarray:
    return curves[:, [e - 1 for e in epochs]]


def _rank_split(train: CurveDataset, fraction: float, seed: int):
    """Validation groups (multi-seed architectures) and the remaining records."""
    groups = train.groups()
    multi = [a for a, idx in groups.items() if len(idx) >= 2]
    if not multi:
        raise ValueError("automatic rank selection needs architectures with at least 2 seeds")
    n_val = min(len(multi), max(1, round(fraction * len(groups))))
    if n_val == len(groups):
        n_val = len(groups) - 1
    if n_val < 1:
        raise ValueError("automatic rank selection needs at least 2 architectures")
    rng = substream(seed, "rank_split")
    chosen = {multi[i] for i in rng.permutation(len(multi))[:n_val]}
    val = [train.curves[groups[a]] for a in multi if a in chosen]
    rest = np.concatenate([groups[a] for a in groups if a not in chosen])
    return train.curves[np.sort(rest)], val


def fit_surrogate(train: CurveDataset, config: SurrogateConfig) -> SurrogateModel:
    if len(train) == 0:
        raise ValueError("training set is empty")
    config.check_space(train.space.e_max)
    S = train.curves
    report = {"n_train_records": len(train), "n_train_archs": len(train.groups())}
    multi_seed = any(len(idx) >= 2 for idx in train.groups().values())
    if config.k is None and not multi_seed:
        k = min(DEFAULT_K, *S.shape)
        report["k_source"] = "default"
    elif config.k in (None, "auto"):
        fit_curves, val = _rank_split(train, config.val_fraction, config.rng_seed)
        profile = rank_mse_profile(fit_curves, val, config.k_max)
        tol = 1e-10 * np.mean([np.mean(g**2) for g in val])
        k = int(np.flatnonzero(profile <= profile.min() + tol)[0]) + 1
        report["rank_mse"] = [float(v) for v in profile]
        report["k_source"] = "auto"
    else:
        k = int(config.k)
        report["k_source"] = "fixed"
    if k > min(S.shape):
        raise ValueError(f"k={k} exceeds min(N, E_max)={min(S.shape)}")
    report["k"] = k
    basis = truncated_svd(S, k)
    Z = compress(S, basis)
    X = train.encodings
    if config.aug_epochs():
        X = np.hstack([X, _aug_values(S, config.aug_epochs())])
    mu = regress.fit(config.mu, X, Z)
    residuals = noise_mod.ResidualSet(S - decompress(Z, basis), X)
    pred = mu.predict(X) if config.noise_kind == "window" else None
    nm = noise_mod.fit_noise(config.noise_kind, residuals, pred, config.window_regressor)
    report["train_archs"] = [str(a) for a in train.unique_archs()]
    return SurrogateModel(train.space, basis, mu, nm, config, report)


def query_mean(model: SurrogateModel, arch: Architecture, augmentation=None) -> np.ndarray:
    return model.query_mean(arch, augmentation)


def query_noisy(model: SurrogateModel, arch: Architecture, seed: int, up_to_epoch: int | None = None,
                augmentation=None) -> np.ndarray:
    return model.query_noisy(arch, seed, up_to_epoch, augmentation)


# -- persistence -------------------------------------------------------------

def _pack_sections(arrays: dict) -> tuple[list, bytes]:
    table, blobs = [], []
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        dtype = "<i8" if a.dtype.kind in "iub" else "<f8"
        raw = np.ascontiguousarray(a, dtype=dtype).tobytes()
        table.append({"name": name, "dtype": dtype, "shape": list(a.shape)})
        blobs.append(struct.pack("<Q", len(raw)) + raw)
    return table, b"".join(blobs)


def save_surrogate(model: SurrogateModel, path) -> None:
    mu_meta, mu_arr = model.mu.state()
    nz_meta, nz_arr = model.noise.state()
    arrays = {"basis.vectors": model.basis.vectors, "basis.singular_values": model.basis.singular_values}
    arrays.update({f"mu.{k}": v for k, v in mu_arr.items()})
    arrays.update({f"noise.{k}": v for k, v in nz_arr.items()})
    table, body = _pack_sections(arrays)
    header = {
        "format_version": FORMAT_VERSION,
        "version": model.config.version,
        "space": model.space.to_dict(),
        "config": model.config.to_dict(),
        "fit_report": model.fit_report,
        "k": model.basis.k,
        "mu": mu_meta,
        "noise": nz_meta,
        "sections": table,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = MAGIC + struct.pack("<I", len(hbytes)) + hbytes + body
    payload += struct.pack("<I", zlib.crc32(payload))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def load_surrogate(path) -> SurrogateModel:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8 or not data.startswith(MAGIC):
        raise SurrogateFormatError("not a surrogate file (bad magic bytes)")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise ChecksumError("surrogate file checksum mismatch; the file is corrupted")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    if header.get("format_version") != FORMAT_VERSION:
        raise SurrogateFormatError(
            f"unsupported surrogate format version {header.get('format_version')!r} (expected {FORMAT_VERSION})")
    arrays = {}
    for sec in header["sections"]:
        (n,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        arrays[sec["name"]] = np.frombuffer(data[pos:pos + n], dtype=sec["dtype"]).reshape(sec["shape"]).copy()
        pos += n
    if pos != len(data) - 4:
        raise SurrogateFormatError("trailing bytes after the last section")
    space = SearchSpaceSpec.from_dict(header["space"])
    k = int(header["k"])
    basis = SvdBasis(k, arrays["basis.vectors"], arrays["basis.singular_values"])
    sub = lambda prefix: {n[len(prefix):]: v for n, v in arrays.items() if n.startswith(prefix)}
    mu = regress.FittedRegressor.from_state(header["mu"], sub("mu."))
    nm = noise_mod.NoiseModel.from_state(header["noise"], sub("noise."))
    config = SurrogateConfig.from_dict(header["config"])
    return SurrogateModel(space, basis, mu, nm, config, header["fit_report"])
