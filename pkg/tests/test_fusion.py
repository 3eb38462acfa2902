import json

import numpy as np
import pytest
import torch

from conftest import make_box, make_sheet
from skinfree.autodiff import gradient_check
from skinfree.data.synth import (
    BodyRig,
    DeformationModel,
    GarmentSpec,
    gt_deform,
    make_body,
    make_garment_template,
)
from skinfree.errors import DataError, FusionDivergenceError
from skinfree.fusion import (
    FusionConfig,
    FusionState,
    fuse,
    init_positions,
    loss_collision,
    loss_edge,
    loss_normal_consistency,
    loss_normal_render,
    loss_position_render,
    loss_reg_visible,
    penetrating_count,
    stage1_optimize,
    stage2_optimize,
    vertex_normals_torch,
    write_trace,
)
from skinfree.fusion.optimizer import HIDDEN, _optimize
from skinfree.geometry import BodyCollider
from skinfree.mesh import TriMesh, edge_set, vertex_normals
from skinfree.metrics import rmse
from skinfree.raster import (
    AttributeImage,
    PositionBounds,
    TorchRenderer,
    VisibilityTable,
    build_camera_rig,
    encode_mesh_images,
    rasterize_template,
)


def _wavy(sheet):
    v = sheet.vertices.copy()
    v[:, 2] = 10.0 * np.sin(v[:, 0] / 50.0) * np.cos(v[:, 1] / 70.0)
    return sheet.with_vertices(v)


def _render_setup(mesh, resolution=32):
    rig = build_camera_rig(mesh, resolution=resolution)
    renderers, normal_imgs, pos_imgs = {}, {}, {}
    bounds = PositionBounds.from_points(mesh.vertices)
    for view in ("front", "back"):
        raster, _ = rasterize_template(mesh, rig, view)
        renderers[view] = TorchRenderer(raster)
        images = encode_mesh_images(raster, mesh.vertices, vertex_normals(mesh), bounds)
        pos_imgs[view], normal_imgs[view] = images["position"], images["normal"]
    return rig, renderers, pos_imgs, normal_imgs, bounds


def test_edge_loss_values(sheet):
    edges = edge_set(sheet)
    v = torch.tensor(sheet.vertices)
    assert loss_edge(v, edges).item() == 0.0
    doubled = loss_edge(2.0 * v, edges).item()
    assert doubled == pytest.approx(np.mean(edges.rest_lengths ** 2))


def test_reg_visible_values(sheet):
    v = torch.tensor(sheet.vertices)
    anchors = sheet.vertices + [3.0, 4.0, 0.0]
    assert loss_reg_visible(v, anchors).item() == pytest.approx(25.0)
    assert loss_reg_visible(v, anchors, [0, 1]).item() == pytest.approx(25.0)
    assert loss_reg_visible(v, anchors, []).item() == 0.0


def test_normal_consistency_of_flat_sheet_is_zero(sheet):
    v = torch.tensor(sheet.vertices)
    assert loss_normal_consistency(v, sheet.faces, edge_set(sheet)).item() == 0.0
    wavy = _wavy(sheet)
    assert loss_normal_consistency(torch.tensor(wavy.vertices), wavy.faces, edge_set(wavy)).item() > 0


def test_torch_normals_match_numpy(tiny_rig):
    body = make_body(tiny_rig, [0.3, 0.2])
    torch_normals = vertex_normals_torch(torch.tensor(body.vertices), body.faces).numpy()
    np.testing.assert_allclose(torch_normals, vertex_normals(body), atol=1e-12)


def test_render_losses_vanish_at_their_targets(sheet):
    mesh = _wavy(sheet)
    _, renderers, pos_imgs, normal_imgs, bounds = _render_setup(mesh)
    v = torch.tensor(mesh.vertices, requires_grad=True)
    normal_loss = loss_normal_render(v, mesh.faces, renderers, normal_imgs)
    position_loss = loss_position_render(v, renderers, pos_imgs, bounds)
    assert normal_loss.item() == pytest.approx(0.0, abs=1e-12)
    assert position_loss.item() == pytest.approx(0.0, abs=1e-12)

    flat = torch.tensor(sheet.vertices)
    assert loss_normal_render(flat, sheet.faces, renderers, normal_imgs).item() > 0


def test_collision_loss(box):
    collider = BodyCollider(box)
    outside = torch.tensor([[0.0, 0.0, 80.0], [90.0, 0.0, 0.0]], requires_grad=True)
    assert loss_collision(outside, collider).item() == 0.0

    inside = torch.tensor([[0.0, 0.0, 40.0], [0.0, 0.0, 100.0]], requires_grad=True)
    loss = loss_collision(inside, collider)
    assert loss.item() == pytest.approx(10.0 / 2)
    loss.backward()
    np.testing.assert_allclose(inside.grad.numpy(), [[0.0, 0.0, -0.5], [0.0, 0.0, 0.0]])


def test_smooth_losses_pass_gradient_check():
    mesh = _wavy(make_sheet(4, 4, 100.0))
    edges = edge_set(mesh)
    rng = np.random.default_rng(0)
    start = mesh.vertices + rng.normal(scale=2.0, size=mesh.vertices.shape)
    assert gradient_check(lambda v: loss_edge(v, edges), start)
    assert gradient_check(lambda v: loss_normal_consistency(v, mesh.faces, edges), start)
    assert gradient_check(lambda v: loss_reg_visible(v, mesh.vertices), start)


def test_render_losses_pass_gradient_check(sheet):
    mesh = _wavy(sheet)
    _, renderers, pos_imgs, normal_imgs, bounds = _render_setup(mesh)
    rng = np.random.default_rng(1)
    start = mesh.vertices + rng.normal(scale=2.0, size=mesh.vertices.shape)
    assert gradient_check(lambda v: loss_normal_render(v, mesh.faces, renderers, normal_imgs),
                          start)
    assert gradient_check(lambda v: loss_position_render(v, renderers, pos_imgs, bounds), start)


def test_collision_loss_passes_gradient_check(box):
    collider = BodyCollider(box)
    # Interior points well inside a single face region, plus two outside.
    points = np.array([[0.0, 0.0, 40.0], [10.0, -5.0, 35.0], [-20.0, 10.0, -42.0],
                       [38.0, 4.0, -3.0], [0.0, 0.0, 80.0], [90.0, 10.0, 0.0]])
    assert gradient_check(lambda v: loss_collision(v, collider), points)


def test_init_interpolates_hidden_vertices():
    template = TriMesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                       [[0, 1, 3], [1, 2, 3]])
    bounds = PositionBounds(np.zeros(3), np.full(3, 8.0))
    mask = np.ones((4, 4), dtype=bool)
    images = {"front": AttributeImage(np.full((4, 4, 3), 0.25), mask, "front"),
              "back": AttributeImage(np.full((4, 4, 3), 0.75), mask, "back")}
    coords = np.full((4, 2), 2.0)

    def table(view, visible, margin):
        return VisibilityTable(view, np.array(visible), coords, np.ones(4), np.array(margin))

    vis = {"front": table("front", [True, False, False, True], [1.0, -np.inf, -np.inf, 1.0]),
           "back": table("back", [False, False, True, True], [-np.inf, -np.inf, 1.0, 2.0])}
    state = init_positions(images, vis, template, bounds)
    np.testing.assert_allclose(state.vertices[0], [2.0, 2.0, 2.0])
    np.testing.assert_allclose(state.vertices[2], [6.0, 6.0, 6.0])
    # Vertex 1 is equidistant from its nearest front (0) and back (2) vertices.
    np.testing.assert_allclose(state.vertices[1], [4.0, 4.0, 4.0])
    # Vertex 3 is seen by both views; the back view has the larger margin.
    np.testing.assert_allclose(state.vertices[3], [6.0, 6.0, 6.0])
    assert state.source.tolist() == [0, HIDDEN, 1, 1]
    np.testing.assert_array_equal(state.anchor_subset, [0, 2, 3])


def test_init_needs_visible_vertices(sheet):
    bounds = PositionBounds.from_points(sheet.vertices)
    mask = np.ones((4, 4), dtype=bool)
    images = {v: AttributeImage(np.full((4, 4, 3), 0.5), mask, v) for v in ("front", "back")}
    n = sheet.num_vertices
    vis = {v: VisibilityTable(v, np.zeros(n, dtype=bool), np.zeros((n, 2)), np.ones(n),
                              np.full(n, -np.inf)) for v in ("front", "back")}
    with pytest.raises(DataError):
        init_positions(images, vis, sheet, bounds)


def test_lambda_rn_presets():
    assert FusionConfig(lambda_rn=None).for_garment("tshirt").lambda_rn == 0.001
    assert FusionConfig(lambda_rn=None).for_garment("dress").lambda_rn == 0.01
    assert FusionConfig(lambda_rn=0.5).for_garment("tshirt").lambda_rn == 0.5
    with pytest.raises(ValueError):
        FusionConfig(lambda_e=-1.0)


def test_divergence_aborts_with_trace():
    calls = []

    def terms(v):
        calls.append(None)
        return {"grow": (1.0, (v * 0.0).sum() + 100.0 ** len(calls))}

    cfg = FusionConfig(stage1_steps=5)
    with pytest.raises(FusionDivergenceError) as info:
        _optimize("stage1", np.zeros((3, 3)), 5, terms, cfg)
    assert info.value.stage == "stage1"
    assert info.value.step == 1
    assert [e["step"] for e in info.value.trace] == [0, 1]


def test_non_finite_loss_aborts():
    def terms(v):
        return {"bad": (1.0, v.sum() * float("nan"))}

    with pytest.raises(FusionDivergenceError) as info:
        _optimize("stage2", np.ones((2, 3)), 3, terms, FusionConfig())
    assert info.value.step == 0


def test_fuse_sheet_end_to_end(sheet, tmp_path):
    mesh = _wavy(sheet)
    rig, _, pos_imgs, normal_imgs, bounds = _render_setup(mesh, resolution=48)
    body = make_box(center=(0.0, 0.0, -400.0), half=50.0)
    cfg = FusionConfig(stage1_steps=10, stage2_steps=10, lambda_rp=1.0, lr=1e-4)
    result = fuse(pos_imgs, normal_imgs, mesh, body, bounds, cfg, rig, garment_kind="dress")

    assert result.mesh.num_vertices == mesh.num_vertices
    assert len(result.trace) == 20
    assert [e["stage"] for e in result.trace] == ["stage1"] * 10 + ["stage2"] * 10
    assert {"normal_render", "edge", "collision", "position_render"} <= set(result.trace[-1])
    assert result.visibility["either"] > 0.9
    assert rmse(result.initial, mesh) < 6.0
    assert rmse(result.mesh, mesh) < 10.0
    assert result.config.lambda_rn == 0.01

    path = tmp_path / "trace.json"
    write_trace(str(path), result)
    data = json.loads(path.read_text())
    assert len(data["trace"]) == 20
    assert data["config"]["stage1_steps"] == 10


def test_fuse_is_deterministic(sheet):
    mesh = _wavy(sheet)
    rig, _, pos_imgs, normal_imgs, bounds = _render_setup(mesh)
    body = make_box(center=(0.0, 0.0, -400.0))
    cfg = FusionConfig(stage1_steps=3, stage2_steps=3, lr=1e-4)
    a = fuse(pos_imgs, normal_imgs, mesh, body, bounds, cfg, rig)
    b = fuse(pos_imgs, normal_imgs, mesh, body, bounds, cfg, rig)
    np.testing.assert_array_equal(a.mesh.vertices, b.mesh.vertices)
    assert a.trace == b.trace


def test_fuse_rejects_swapped_images(sheet):
    mesh = _wavy(sheet)
    rig, _, pos_imgs, normal_imgs, bounds = _render_setup(mesh)
    with pytest.raises(DataError):
        fuse(pos_imgs, pos_imgs, mesh, make_box(center=(0, 0, -400)), bounds,
             FusionConfig(stage1_steps=1, stage2_steps=1), rig)


def _state(vertices):
    n = len(vertices)
    return FusionState(np.array(vertices, dtype=float), np.zeros(n, dtype=np.int64),
                       np.array(vertices, dtype=float), np.arange(n))


def test_stage1_keeps_an_exact_start(sheet):
    state, trace = stage1_optimize(_state(sheet.vertices), sheet, FusionConfig())
    assert len(trace) == 100
    assert max(e["total"] for e in trace) < 1e-12
    assert np.abs(state.vertices - sheet.vertices).max() < 1e-3


def test_stage1_near_its_optimum_does_not_diverge(sheet):
    rng = np.random.default_rng(2)
    start = sheet.vertices + rng.normal(scale=1e-4, size=sheet.vertices.shape)
    state, trace = stage1_optimize(_state(start), sheet, FusionConfig())
    assert len(trace) == 100
    assert np.all(np.isfinite(state.vertices))


def test_large_learning_rate_diverges(sheet):
    rng = np.random.default_rng(2)
    start = sheet.vertices + rng.normal(scale=1.0, size=sheet.vertices.shape)
    with pytest.raises(FusionDivergenceError) as info:
        stage1_optimize(_state(start), sheet, FusionConfig(lr=10.0))
    assert info.value.stage == "stage1"
    assert 1 <= info.value.step < 100


def test_stage2_keeps_a_self_consistent_start(sheet):
    mesh = _wavy(sheet)
    _, renderers, _, normal_imgs, _ = _render_setup(mesh)
    body = BodyCollider(make_box(center=(0.0, 0.0, -400.0)))
    vertices, trace = stage2_optimize(_state(mesh.vertices), mesh, normal_imgs, renderers, body,
                                      FusionConfig())
    assert len(trace) == 100
    assert trace[0]["normal_render"] < 1e-9
    assert trace[0]["edge"] < 1e-20 and trace[0]["reg_visible"] == 0.0
    assert rmse(mesh.with_vertices(vertices), mesh) < 2.0


def test_identity_images_fuse_to_the_template(sheet):
    mesh = _wavy(sheet)
    rig, _, pos_imgs, normal_imgs, bounds = _render_setup(mesh, resolution=128)
    body = make_box(center=(0.0, 0.0, -400.0))
    result = fuse(pos_imgs, normal_imgs, mesh, body, bounds, FusionConfig(), rig)
    assert len(result.trace) == 200
    assert rmse(result.mesh, mesh) < 0.01 * mesh.bbox_diagonal()


def test_collision_term_pushes_vertices_out_of_the_body():
    sheet = make_sheet()
    # The box swallows the whole sheet 5 mm below its top face.
    collider = BodyCollider(make_box(center=(0.0, 0.0, -145.0), half=150.0))
    _, renderers, _, normal_imgs, _ = _render_setup(sheet)
    start = penetrating_count(sheet.vertices, collider)
    assert start == sheet.num_vertices

    runs = {}
    for weight in (0.0, 100.0):
        vertices, _ = stage2_optimize(_state(sheet.vertices), sheet, normal_imgs, renderers,
                                      collider, FusionConfig(lambda_c=weight))
        runs[weight] = penetrating_count(vertices, collider)
    assert runs[0.0] >= 0.05 * sheet.num_vertices
    assert runs[100.0] <= 0.1 * runs[0.0]
    assert runs[100.0] <= start


@pytest.mark.slow
def test_gt_images_recover_a_wrinkled_dress():
    rig, spec, model = BodyRig(), GarmentSpec(), DeformationModel()
    template = make_garment_template(spec, rig, model.margin)
    assert template.num_vertices >= 2000 and model.amplitude == 15.0
    theta = [0.3, 0.2]
    body = make_body(rig, theta)
    gt = gt_deform(template, model, rig, theta, body=body, attachment=spec.attachment_indices())

    cameras = build_camera_rig(template, resolution=256)
    bounds = PositionBounds.from_points(np.concatenate([template.vertices, gt.vertices]))
    pos_imgs, normal_imgs = {}, {}
    for view in ("front", "back"):
        raster, _ = rasterize_template(template, cameras, view)
        images = encode_mesh_images(raster, gt.vertices, vertex_normals(gt), bounds)
        pos_imgs[view], normal_imgs[view] = images["position"], images["normal"]

    result = fuse(pos_imgs, normal_imgs, template, body, bounds, FusionConfig(), cameras,
                  garment_kind=spec.kind)
    assert result.visibility["either"] >= 0.95
    assert rmse(result.mesh, gt) <= 0.01 * template.bbox_diagonal()
    assert rmse(result.mesh, gt) < rmse(result.stage1, gt)
