"""vdmforge: vector displacement map brush generation via Sobolev-preconditioned
grid mesh deformation."""

from .vdm import (VdmImage, VdmScale, SpikeParams, make_zero_vdm, make_spike_vdm,
                  vdm_to_world, save_exr, load_exr, load_png, load_mask_png)
from .mesh import (GridMesh, build_grid_mesh, uniform_laplacian, face_normals,
                   vertex_normals, save_obj, load_obj_grid)
from .intersect import self_intersection_ratio, intersecting_face_flags
from .precond import PrecondSolver, build_preconditioner, precondition_gradient
from .render import (Camera, CameraConfig, NormalRender, sample_cameras,
                     rasterize_normals, backprop_to_vertices)
from .guidance import (GuidanceResponse, TargetShapeGuidance, WireGuidanceClient,
                       external_guidance, encode_frame, decode_frame)
from .optimizer import OptimConfig, RegionMask, OptimResult, optimize, step
from .baking import BakeResult, bake

__version__ = "0.1.0"
