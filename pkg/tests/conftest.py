"""Shared fixtures: small meshes, rigs and network settings that keep tests fast."""

import numpy as np
import pytest
import torch

from skinfree.data.synth import BodyRig, DeformationModel, GarmentSpec
from skinfree.mesh.trimesh import TriMesh
from skinfree.models.transfer_net import TransferNetConfig


def make_sheet(rows: int = 6, cols: int = 6, size: float = 200.0, z: float = 0.0) -> TriMesh:
    """Flat square grid in the plane z = const, wound to face +z."""
    xs = np.linspace(-size / 2, size / 2, cols)
    ys = np.linspace(size / 2, -size / 2, rows)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.stack([gx.ravel(), gy.ravel(), np.full(rows * cols, z)], axis=1)
    faces = []
    for i in range(rows - 1):
        for j in range(cols - 1):
            a = i * cols + j
            b, c = a + 1, a + cols
            faces += [[a, c, b], [b, c, c + 1]]
    return TriMesh(vertices, np.array(faces), name="sheet")


def make_box(center=(0.0, 0.0, 0.0), half: float = 50.0) -> TriMesh:
    """Closed axis-aligned cube with outward winding."""
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    faces = np.array([
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ])
    return TriMesh(corners * half + np.asarray(center), faces, name="box")


def make_icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriMesh:
    """Subdivided icosahedron projected onto a sphere, wound outward."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [list(v) for v in (
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    )]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        midpoints = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoints:
                midpoints[key] = len(vertices)
                vertices.append([(a + b) / 2.0 for a, b in zip(vertices[i], vertices[j])])
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    points = np.asarray(vertices, dtype=float)
    points = radius * points / np.linalg.norm(points, axis=1, keepdims=True)
    return TriMesh(points, np.asarray(faces), name="icosphere")


@pytest.fixture(autouse=True)
def single_thread():
    torch.set_num_threads(1)
    torch.manual_seed(0)


@pytest.fixture
def sheet():
    return make_sheet()


@pytest.fixture
def box():
    return make_box()


@pytest.fixture
def tiny_rig():
    return BodyRig(segment_lengths=(100.0, 100.0, 100.0), radii=(40.0, 48.0, 44.0, 36.0),
                   ring_segments=12, rings_per_segment=2, cap_rings=3)


@pytest.fixture
def tiny_spec():
    return GarmentSpec(topology="tube", kind="dress", rings=8, segments=12, radius=75.0,
                       length=220.0, top=-10.0, attachment_rings=1)


@pytest.fixture
def tiny_model():
    return DeformationModel(amplitude=4.0, waves=3, phase_coeff=3.0, margin=5.0,
                            blend_width=30.0, fade_length=40.0, seed=0)


@pytest.fixture
def tiny_net_cfg():
    return TransferNetConfig(image_size=32, patch_size=8, dim=16, heads=2, blocks=1,
                             mlp_ratio=2, decoder_channels=(8, 8, 8), residual_blocks=1)
