import numpy as np
import pytest

from vdmforge.mesh import GridMesh, build_grid_mesh, grid_faces
from vdmforge.vdm import VdmImage, VdmScale, make_zero_vdm


def gaussian_bump_vdm(res: int, amplitude: float = 0.3, sigma: float = 0.15,
                      plane_side: float = 1.0) -> VdmImage:
    """Target VDM whose Z channel is a centered gaussian bump.

    amplitude and sigma are given in world units (fractions of plane_side
    when plane_side is 1).
    """
    x = np.linspace(-plane_side / 2, plane_side / 2, res)
    xx, yy = np.meshgrid(x, x)
    z_world = amplitude * np.exp(-(xx ** 2 + yy ** 2) / (2 * sigma ** 2))
    data = np.zeros((res, res, 3), dtype=np.float32)
    data[:, :, 2] = z_world / (0.5 * plane_side)
    return VdmImage(data)


def free_mesh(vertices, faces, plane_side=1.0) -> GridMesh:
    """Hand-built mesh (not a grid) for targeted geometry tests."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int32)
    return GridMesh(0, 0, vertices, faces, vertices.copy(), plane_side)


@pytest.fixture
def flat9():
    return build_grid_mesh(make_zero_vdm(9), VdmScale(1.0))


# Acceptance verdict lines collected by tests/test_acceptance.py; echoed in the
# terminal summary so they survive pytest's output capture.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
