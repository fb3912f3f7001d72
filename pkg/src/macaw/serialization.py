"""File formats: JSON configs/results and a binary complex-matrix container.

JSON is UTF-8 with sorted keys so equal objects serialize to equal bytes.
Bulk complex arrays use a small binary container: 8-byte magic "MACAWBIN",
u32 version, u32 ndims, u64 dims[], then little-endian float64 interleaved
(re, im) in row-major order over the declared dims.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .channel import OFDMConfig
from .errors import ValidationError
from .geometry import (EffectivePathParams, PathGeometry, SurfacePatch,
                       UPAConfig)
from .scenario import Scenario, ScenarioConfig

MAGIC = b"MACAWBIN"
BIN_VERSION = 1
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# binary complex container


def write_complex(path, a: np.ndarray) -> None:
    """Write a complex ndarray to the binary container format."""
    a = np.asarray(a, dtype=np.complex128)
    inter = np.empty(a.shape + (2,), dtype="<f8")
    inter[..., 0] = a.real
    inter[..., 1] = a.imag
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", BIN_VERSION, a.ndim))
        f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        f.write(np.ascontiguousarray(inter).tobytes())


def read_complex(path) -> np.ndarray:
    """Read a complex ndarray from the binary container format."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise ValidationError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, ndims = struct.unpack("<II", f.read(8))
        if version != BIN_VERSION:
            raise ValidationError(f"unsupported container version {version}")
        dims = struct.unpack(f"<{ndims}Q", f.read(8 * ndims))
        n = int(np.prod(dims)) if dims else 1
        raw = np.frombuffer(f.read(16 * n), dtype="<f8")
        if raw.size != 2 * n:
            raise ValidationError("truncated binary container")
    inter = raw.reshape(dims + (2,))
    return (inter[..., 0] + 1j * inter[..., 1]).astype(np.complex128)


# ---------------------------------------------------------------------------
# JSON codecs


def _vec(v) -> list:
    return [float(x) for x in np.asarray(v)]


def upa_to_dict(upa: UPAConfig) -> dict:
    return {
        "n_y": upa.n_y, "n_z": upa.n_z, "d_ant": upa.d_ant,
        "center": _vec(upa.center),
        "row_dir": _vec(upa.row_dir), "col_dir": _vec(upa.col_dir),
    }


def upa_from_dict(d: dict) -> UPAConfig:
    return UPAConfig(n_y=int(d["n_y"]), n_z=int(d["n_z"]),
                     d_ant=float(d["d_ant"]),
                     center=np.array(d["center"], dtype=float),
                     row_dir=np.array(d["row_dir"], dtype=float),
                     col_dir=np.array(d["col_dir"], dtype=float))


def ofdm_to_dict(ofdm: OFDMConfig) -> dict:
    return {"carrier_f": ofdm.carrier_f, "bandwidth": ofdm.bandwidth,
            "n_subcarriers": ofdm.n_subcarriers}


def ofdm_from_dict(d: dict) -> OFDMConfig:
    return OFDMConfig(carrier_f=float(d["carrier_f"]),
                      bandwidth=float(d["bandwidth"]),
                      n_subcarriers=int(d["n_subcarriers"]))


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "upa": upa_to_dict(cfg.upa),
        "ofdm": ofdm_to_dict(cfg.ofdm),
        "ue_pos": _vec(cfg.ue_pos),
        "n_scatterers": cfg.n_scatterers,
        "n_symbols": cfg.n_symbols,
        "n_rf": cfg.n_rf,
        "snr_db": cfg.snr_db,
        "r_min": cfg.r_min,
        "seed": cfg.seed,
        "scatterer_curvature": cfg.scatterer_curvature,
        "path_spacing_factor_range": list(cfg.path_spacing_factor_range),
        "fixed_scatterer": None if cfg.fixed_scatterer is None
        else _vec(cfg.fixed_scatterer),
        "label": cfg.label,
    }


def config_from_dict(d: dict) -> ScenarioConfig:
    return ScenarioConfig(
        upa=upa_from_dict(d["upa"]),
        ofdm=ofdm_from_dict(d["ofdm"]),
        ue_pos=np.array(d["ue_pos"], dtype=float),
        n_scatterers=int(d["n_scatterers"]),
        n_symbols=int(d["n_symbols"]),
        n_rf=int(d["n_rf"]),
        snr_db=float(d["snr_db"]),
        r_min=None if d.get("r_min") is None else float(d["r_min"]),
        seed=int(d["seed"]),
        scatterer_curvature=float(d["scatterer_curvature"]),
        path_spacing_factor_range=tuple(d["path_spacing_factor_range"]),
        fixed_scatterer=None if d.get("fixed_scatterer") is None
        else np.array(d["fixed_scatterer"], dtype=float),
        label=d.get("label", ""),
    )


def _patch_to_dict(p: SurfacePatch) -> dict:
    return {
        "point": _vec(p.point), "normal": _vec(p.normal),
        "principal_dirs": [_vec(p.principal_dirs[0]), _vec(p.principal_dirs[1])],
        "principal_curvatures": list(p.principal_curvatures),
    }


def _patch_from_dict(d: dict) -> SurfacePatch:
    return SurfacePatch(
        point=np.array(d["point"], dtype=float),
        normal=np.array(d["normal"], dtype=float),
        principal_dirs=(np.array(d["principal_dirs"][0], dtype=float),
                        np.array(d["principal_dirs"][1], dtype=float)),
        principal_curvatures=tuple(d["principal_curvatures"]),
    )


def _path_to_dict(p: PathGeometry) -> dict:
    return {
        "ue_pos": _vec(p.ue_pos),
        "bounces": [_patch_to_dict(b) for b in p.bounces],
        "reflection_loss": p.reflection_loss,
        "reflection_phase": p.reflection_phase,
    }


def _path_from_dict(d: dict) -> PathGeometry:
    return PathGeometry(
        ue_pos=np.array(d["ue_pos"], dtype=float),
        bounces=tuple(_patch_from_dict(b) for b in d["bounces"]),
        reflection_loss=float(d["reflection_loss"]),
        reflection_phase=float(d["reflection_phase"]),
    )


def params_to_dict(p: EffectivePathParams) -> dict:
    return {
        "k_bar": _vec(p.k_bar),
        "q_bar": [_vec(row) for row in np.asarray(p.q_bar)],
        "s_bar": float(p.s_bar),
        "alpha": [float(np.real(p.alpha)), float(np.imag(p.alpha))],
    }


def params_from_dict(d: dict) -> EffectivePathParams:
    return EffectivePathParams(
        k_bar=np.array(d["k_bar"], dtype=float),
        q_bar=np.array(d["q_bar"], dtype=float),
        s_bar=float(d["s_bar"]),
        alpha=complex(d["alpha"][0], d["alpha"][1]),
    )


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": config_to_dict(sc.config),
        "paths": [_path_to_dict(p) for p in sc.paths],
        "true_params": [params_to_dict(p) for p in sc.true_params],
    }


def scenario_from_dict(d: dict) -> Scenario:
    return Scenario(
        config=config_from_dict(d["config"]),
        paths=tuple(_path_from_dict(p) for p in d["paths"]),
        true_params=tuple(params_from_dict(p) for p in d["true_params"]),
    )


def dump_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def canonical_bytes(obj: dict) -> bytes:
    """Stable byte serialization used for content hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def content_hash(obj: dict) -> str:
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record: config snapshot, input hash, version, time."""

    config: dict
    input_hash: str
    tool_version: str
    timestamp: str

    @classmethod
    def create(cls, config: dict, tool_version: str) -> "RunManifest":
        return cls(config=config, input_hash=content_hash(config),
                   tool_version=tool_version,
                   timestamp=datetime.datetime.now(
                       datetime.timezone.utc).isoformat())

    def to_dict(self) -> dict:
        return {"config": self.config, "input_hash": self.input_hash,
                "tool_version": self.tool_version, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(config=d["config"], input_hash=d["input_hash"],
                   tool_version=d["tool_version"], timestamp=d["timestamp"])
