"""Voxel occupancy shape completion: dataset generation, a 3d convolutional
completion network, mesh reconstruction, and evaluation metrics."""

from ._core import (
    IoError,
    Model,
    NumericalError,
    cluster,
    complete_cloud,
    forward,
    gen_dataset,
    generate_pair,
    geodesic_divergence,
    hausdorff_mm,
    init_model,
    is_closed,
    jaccard,
    load_cloud,
    load_mesh,
    load_model,
    make_shape,
    marching_cubes,
    mesh_jaccard,
    reconstruct,
    save_cloud,
    save_mesh,
    shape_families,
    solid_voxelize,
    train,
)

__all__ = [
    "IoError",
    "Model",
    "NumericalError",
    "cluster",
    "complete_cloud",
    "forward",
    "gen_dataset",
    "generate_pair",
    "geodesic_divergence",
    "hausdorff_mm",
    "init_model",
    "is_closed",
    "jaccard",
    "load_cloud",
    "load_mesh",
    "load_model",
    "make_shape",
    "marching_cubes",
    "mesh_jaccard",
    "reconstruct",
    "save_cloud",
    "save_mesh",
    "shape_families",
    "solid_voxelize",
    "train",
]

__version__ = "0.1.0"
