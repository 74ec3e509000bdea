"""Single-file checkpoint archives.

A checkpoint is a zip container holding a JSON manifest plus one raw
little-endian float32 blob per parameter array under arrays/<component>/<name>.
The manifest records the step, configs, mel standardization stats, a loss
curve, and per-array shape/dtype/sha256. Entry metadata is pinned (fixed
timestamp, no compression) so a save -> load -> save round trip is
byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import zipfile

import numpy as np

from .errors import CheckpointError
from .signal import MelStats

FORMAT_VERSION = 1

_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclasses.dataclass
class Checkpoint:
    """A loaded (possibly partial) checkpoint."""

    path: str
    manifest: dict
    arrays: dict[str, np.ndarray]

    @property
    def step(self) -> int:
        return int(self.manifest["step"])

    @property
    def components(self) -> list[str]:
        seen = []
        for entry in self.manifest["arrays"]:
            comp = entry["name"].split("/", 1)[0]
            if comp not in seen:
                seen.append(comp)
        return seen

    def config(self, key: str) -> dict:
        try:
            return self.manifest["configs"][key]
        except KeyError:
            raise CheckpointError(f"checkpoint {self.path} has no config entry {key!r}") from None

    def state_arrays(self, component: str) -> dict[str, np.ndarray]:
        """Parameter arrays of one component, keyed by parameter name."""
        prefix = component + "/"
        out = {
            name[len(prefix):]: arr for name, arr in self.arrays.items() if name.startswith(prefix)
        }
        if not out:
            raise CheckpointError(f"checkpoint {self.path} has no component {component!r} loaded")
        return out

    def mel_stats(self) -> MelStats:
        stats = self.manifest.get("mel_stats")
        if stats is None:
            raise CheckpointError(f"checkpoint {self.path} stores no mel stats")
        return MelStats(
            mean=np.asarray(stats["mean"], dtype=np.float32),
            std=np.asarray(stats["std"], dtype=np.float32),
        )


def load_module_state(module, ckpt: "Checkpoint", component: str):
    """Restore a torch module from a checkpoint component, validating shapes."""
    import torch

    tensors = {k: torch.from_numpy(v) for k, v in ckpt.state_arrays(component).items()}
    try:
        module.load_state_dict(tensors)
    except RuntimeError as exc:
        raise CheckpointError(
            f"component {component!r} in {ckpt.path} does not fit the model: {exc}"
        ) from None
    return module


def _as_float32(value) -> np.ndarray:
    if hasattr(value, "detach"):  # torch tensor
        value = value.detach().cpu().numpy()
    return np.ascontiguousarray(np.asarray(value), dtype=np.float32)


def save_checkpoint(
    path,
    step: int,
    components: dict[str, dict],
    configs: dict,
    mel_stats: MelStats | None = None,
    loss_curve=None,
) -> str:
    """Write a checkpoint archive.

    Args:
        path: output file.
        step: training step the state corresponds to.
        components: {component: {param_name: array-or-tensor}}; everything is
            stored as float32.
        configs: JSON-serializable config dicts keyed by name.
        mel_stats: standardization stats to embed in the manifest.
        loss_curve: optional sequence of (step, value) pairs.

    Returns:
        The path written.
    """
    blobs = {}
    entries = []
    for comp in sorted(components):
        params = components[comp]
        if not params:
            raise CheckpointError(f"component {comp!r} has no arrays")
        for name in sorted(params):
            arr = _as_float32(params[name])
            full = f"{comp}/{name}"
            raw = arr.tobytes(order="C")
            blobs[full] = raw
            entries.append(
                {
                    "name": full,
                    "shape": list(arr.shape),
                    "dtype": "float32",
                    "sha256": hashlib.sha256(raw).hexdigest(),
                }
            )
    manifest = {
        "format_version": FORMAT_VERSION,
        "step": int(step),
        "configs": configs,
        "mel_stats": None
        if mel_stats is None
        else {
            "mean": [float(v) for v in mel_stats.mean],
            "std": [float(v) for v in mel_stats.std],
        },
        "loss_curve": [[int(s), float(v)] for s, v in (loss_curve or [])],
        "arrays": entries,
    }
    payload = json.dumps(manifest, sort_keys=True, indent=1).encode("utf-8")
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=_ZIP_DATE)
        zf.writestr(info, payload)
        for full in sorted(blobs):
            info = zipfile.ZipInfo("arrays/" + full, date_time=_ZIP_DATE)
            zf.writestr(info, blobs[full])
    return str(path)


def load_checkpoint(path, components=None) -> Checkpoint:
    """Read a checkpoint, verifying checksums of every loaded array.

    Args:
        path: archive to read.
        components: iterable of component names to load, or None for all.
            Partial loads skip (and never validate) the other components'
            blobs, so a corrupt unrelated component does not block loading.

    Raises:
        CheckpointError: unreadable archive, version mismatch, missing
            component, or checksum/shape mismatch on a loaded array.
    """
    try:
        zf = zipfile.ZipFile(path, "r")
    except (OSError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise CheckpointError(f"checkpoint {path} has no manifest.json") from None
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint {path} manifest is not valid JSON: {exc}") from None
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"checkpoint {path} has format_version {version!r}, expected {FORMAT_VERSION}"
            )
        listed = {c["name"].split("/", 1)[0] for c in manifest["arrays"]}
        if components is None:
            wanted = listed
        else:
            wanted = set(components)
            missing = wanted - listed
            if missing:
                raise CheckpointError(
                    f"checkpoint {path} is missing component(s): {', '.join(sorted(missing))}"
                )
        arrays = {}
        for entry in manifest["arrays"]:
            name = entry["name"]
            if name.split("/", 1)[0] not in wanted:
                continue
            try:
                raw = zf.read("arrays/" + name)
            except KeyError:
                raise CheckpointError(f"checkpoint {path} is missing array {name!r}") from None
            digest = hashlib.sha256(raw).hexdigest()
            if digest != entry["sha256"]:
                raise CheckpointError(f"checksum mismatch for array {name!r} in {path}")
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            if entry["dtype"] != "float32" or len(raw) != 4 * count:
                raise CheckpointError(f"array {name!r} in {path} does not match its manifest entry")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return Checkpoint(path=str(path), manifest=manifest, arrays=arrays)
