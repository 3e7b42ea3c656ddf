"""Synthetic finger-vein captures: bona fide fingers and printed artefacts.

A bona fide capture is a Lambertian render of a finger lying along the image
width, with dark veins in its albedo, under SH lighting scaled per
illumination intensity, plus Gaussian sensor noise. Its artefact is a print of
the same finger: the same albedo behind a halftone screen and paper grain, on a
surface whose normals are pulled toward the camera axis.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import ndimage

from src.config.settings import SynthConfig
from src.core.decomposition import SH_C0, SH_C1, render_shading
from src.models.dataset_models import ILLUMINATIONS, SESSIONS, Manifest, ManifestEntry
from src.models.image_models import GrayImage, LightingCoeffs, NormalMap, PresentationLabel
from src.storage.image_store import write_image
from src.storage.manifest_store import save_manifest

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

MANIFEST_NAME = "manifest.csv"
BACKGROUND_ALBEDO = 0.05
# Frontal key light with a weak sideways component: shading ~0.9 facing the camera.
BASE_LIGHTING = np.array([0.35 / SH_C0, 0.0, 0.55 / SH_C1, 0.05 / SH_C1, 0.0, 0.0, 0.0, 0.0, 0.0])

_LABEL_CODES = {PresentationLabel.BONA_FIDE: 0, PresentationLabel.ATTACK: 1}


@dataclass(frozen=True)
class FingerScene:
    """Geometry and material of one subject's finger on a padded canvas."""

    normals: FloatArray
    albedo: FloatArray
    margin: int

    def crop(self, shift: Tuple[int, int], height: int, width: int) -> Tuple[FloatArray, FloatArray]:
        row = self.margin + shift[0]
        col = self.margin + shift[1]
        return (
            self.normals[row : row + height, col : col + width],
            self.albedo[row : row + height, col : col + width],
        )


def subject_id(index: int) -> str:
    return f"S{index + 1:03d}"


def build_scene(config: SynthConfig, rng: np.random.Generator) -> FingerScene:
    margin = config.session_shift
    height = config.height + 2 * margin
    width = config.width + 2 * margin
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]

    centre = height / 2.0 + rng.uniform(-0.05, 0.05) * config.height
    radius = rng.uniform(0.36, 0.44) * config.height
    # Finger radius breathes slowly along its length.
    radius_profile = radius * (1.0 + 0.04 * np.sin(2.0 * np.pi * cols / width * rng.uniform(0.5, 1.5) + rng.uniform(0, 2 * np.pi)))
    u = (rows - centre) / radius_profile
    inside = np.clip((1.0 - np.abs(u)) / 0.05, 0.0, 1.0)

    tilt = config.finger_tilt * np.clip(u, -1.0, 1.0) * (np.abs(u) < 1.0)
    normals = np.stack([np.zeros_like(tilt), tilt, np.ones_like(tilt)], axis=-1)
    normals /= np.linalg.norm(normals, axis=2)[..., None]

    skin = rng.uniform(0.55, 0.75)
    texture = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma=8.0)
    texture /= max(float(np.abs(texture).max()), 1e-12)
    finger_albedo = skin * (1.0 + 0.05 * texture)

    n_veins = int(rng.integers(config.vein_count[0], config.vein_count[1] + 1))
    for _ in range(n_veins):
        base_row = centre + rng.uniform(-0.7, 0.7) * radius
        amplitude = rng.uniform(0.05, 0.25) * radius
        period = rng.uniform(0.5, 1.5) * width
        phase = rng.uniform(0.0, 2.0 * np.pi)
        slope = rng.uniform(-0.1, 0.1) * radius / width
        path = base_row + amplitude * np.sin(2.0 * np.pi * cols / period + phase) + slope * (cols - width / 2.0)
        vein_width = rng.uniform(*config.vein_width)
        contrast = rng.uniform(*config.vein_contrast)
        distance = rows - path
        finger_albedo *= 1.0 - contrast * np.exp(-(distance**2) / (2.0 * vein_width**2))

    albedo = inside * finger_albedo + (1.0 - inside) * BACKGROUND_ALBEDO
    return FingerScene(normals=normals, albedo=albedo, margin=margin)


def render_capture(
    normals: FloatArray,
    albedo: FloatArray,
    scale: float,
    noise_sigma: float,
    rng: np.random.Generator,
) -> GrayImage:
    shading = render_shading(NormalMap(normals), LightingCoeffs(BASE_LIGHTING * scale))
    image = albedo * shading.values + noise_sigma * rng.standard_normal(albedo.shape)
    return GrayImage(np.clip(image, 0.0, 1.0))


def print_artefact(
    normals: FloatArray, albedo: FloatArray, config: SynthConfig, rng: np.random.Generator
) -> Tuple[FloatArray, FloatArray]:
    """Halftoned, grainy, flattened reproduction of a finger's albedo and shape."""
    rows = np.arange(albedo.shape[0], dtype=np.float64)[:, None]
    cols = np.arange(albedo.shape[1], dtype=np.float64)[None, :]
    screen = 0.5 + 0.5 * np.cos(2.0 * np.pi * cols / config.halftone_period) * np.cos(
        2.0 * np.pi * rows / config.halftone_period
    )
    grain = ndimage.gaussian_filter(rng.standard_normal(albedo.shape), sigma=1.0)
    grain /= max(float(grain.std()), 1e-12)
    printed = np.clip(albedo * (1.0 - config.halftone_amplitude * screen) + config.grain_amplitude * grain, 0.0, 1.0)

    flat = np.zeros_like(normals)
    flat[..., 2] = 1.0
    flattened = (1.0 - config.flattening) * normals + config.flattening * flat
    flattened /= np.linalg.norm(flattened, axis=2)[..., None]
    return flattened, printed


def _subject_entries(config: SynthConfig, index: int, out_dir: Path) -> List[ManifestEntry]:
    subject = subject_id(index)
    scene = build_scene(config, np.random.default_rng([config.seed, index]))
    entries: List[ManifestEntry] = []
    for session in SESSIONS:
        shift_rng = np.random.default_rng([config.seed, index, session])
        shift = (
            int(shift_rng.integers(-config.session_shift, config.session_shift + 1)),
            int(shift_rng.integers(-config.session_shift, config.session_shift + 1)),
        )
        normals, albedo = scene.crop(shift, config.height, config.width)
        print_rng = np.random.default_rng([config.seed, index, session, 99])
        surfaces = {
            PresentationLabel.BONA_FIDE: (normals, albedo),
            PresentationLabel.ATTACK: print_artefact(normals, albedo, config, print_rng),
        }
        for label, (surface_normals, surface_albedo) in surfaces.items():
            for illumination, scale in zip(ILLUMINATIONS, config.illumination_scales):
                noise_rng = np.random.default_rng([config.seed, index, session, _LABEL_CODES[label], illumination])
                image = render_capture(surface_normals, surface_albedo, scale, config.noise_sigma, noise_rng)
                relative = Path(subject) / f"{label.value}_s{session}_i{illumination}.pgm"
                write_image(image, out_dir / relative)
                entries.append(
                    ManifestEntry(
                        subject_id=subject,
                        session=session,
                        illumination=illumination,
                        label=label,
                        path=relative.as_posix(),
                    )
                )
    return entries


def synth_generate(config: SynthConfig, out_dir: Union[str, Path], workers: int = 1) -> Manifest:
    """Write a complete synthetic dataset and its manifest; deterministic given the seed."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_subject = list(pool.map(lambda i: _subject_entries(config, i, target), range(config.n_subjects)))
    manifest = Manifest(tuple(entry for entries in per_subject for entry in entries))
    save_manifest(manifest, target / MANIFEST_NAME)
    logger.info("synthesised %d subjects, %d images in %s", config.n_subjects, len(manifest), target)
    return manifest
