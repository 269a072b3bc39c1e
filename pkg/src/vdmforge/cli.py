"""Command-line entry points: generate, bake, metrics, serve."""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from . import baking, service
from .intersect import self_intersection_ratio
from .mesh import load_obj_grid
from .pipeline import ConfigError, RunConfig, apply_paper_scale, run_generate
from .vdm import VdmScale, save_exr


@click.group()
def main():
    """Generate VDM sculpting brushes by optimizing a displaced grid mesh."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--paper-scale", is_flag=True,
              help="512 grid / 512 renders / 10,000 iterations")
@click.option("--output-dir", default=None)
def generate(config_path, seed, paper_scale, output_dir):
    """Run init -> optimize -> bake and write the artifact bundle."""
    with open(config_path) as f:
        raw = json.load(f)
    if output_dir:
        raw["output_dir"] = output_dir
    try:
        config = RunConfig.from_dict(raw)
    except ConfigError as e:
        click.echo(str(e), err=True)
        sys.exit(2)
    if seed is not None:
        config.optimizer = dataclasses.replace(config.optimizer, seed=seed)
    if paper_scale:
        config = apply_paper_scale(config)
    out = run_generate(config)
    click.echo(json.dumps({"paths": out["paths"],
                           "final_loss": out["metrics"]["final_loss"]}, indent=2))


@main.command()
@click.option("--obj", "obj_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
@click.option("--plane-side", type=float, default=1.0)
@click.option("--absolute-coordinates", is_flag=True,
              help="store raw vertex positions instead of displacements")
def bake(obj_path, out_path, plane_side, absolute_coordinates):
    """Bake a grid-mesh OBJ into an EXR VDM."""
    mesh = load_obj_grid(obj_path, plane_side)
    result = baking.bake(mesh, VdmScale(plane_side),
                         absolute_coordinates=absolute_coordinates)
    save_exr(result.vdm, out_path)
    click.echo(json.dumps(result.stats, indent=2))


@main.command()
@click.option("--obj", "obj_path", required=True, type=click.Path(exists=True))
@click.option("--plane-side", type=float, default=1.0)
def metrics(obj_path, plane_side):
    """Mesh-quality metrics for a grid-mesh OBJ."""
    mesh = load_obj_grid(obj_path, plane_side)
    click.echo(json.dumps({
        "n_vertices": mesh.n_vertices,
        "n_faces": mesh.n_faces,
        "self_intersection_ratio": self_intersection_ratio(mesh),
    }, indent=2))


@main.command()
@click.option("--addr", default="127.0.0.1:8787")
@click.option("--base-dir", default="vdmforge_runs")
@click.option("--static-dir", default=None,
              help="directory of UI assets to serve at /")
def serve(addr, base_dir, static_dir):
    """Run the local job service."""
    service.serve(addr, base_dir, static_dir)


if __name__ == "__main__":
    main()
