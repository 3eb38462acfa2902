"""Procedural bodies, garments and synthetic datasets."""

from .synth import (
    BodyRig,
    DeformationModel,
    GarmentSpec,
    forward_kinematics,
    gt_deform,
    make_body,
    make_garment_template,
    project_out_of_body,
    segment_weights,
    wrinkle_displacement,
)
from .dataset import (
    DatasetManifest,
    PoseSampler,
    SampleRecord,
    TransferPair,
    generate_dataset,
    image_key,
    load_manifest,
    transfer_pairs,
)

__all__ = [
    'BodyRig',
    'DeformationModel',
    'GarmentSpec',
    'forward_kinematics',
    'gt_deform',
    'make_body',
    'make_garment_template',
    'project_out_of_body',
    'segment_weights',
    'wrinkle_displacement',
    'DatasetManifest',
    'PoseSampler',
    'SampleRecord',
    'TransferPair',
    'generate_dataset',
    'image_key',
    'load_manifest',
    'transfer_pairs',
]
