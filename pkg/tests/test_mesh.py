import numpy as np
import pytest

from conftest import make_icosphere
from skinfree.errors import GeometryError, MeshFormatError
from skinfree.mesh import (
    RootTransform,
    TriMesh,
    apply_root_normalization,
    edge_set,
    load_obj,
    save_obj,
    vertex_normals,
)


def test_trimesh_rejects_bad_indices_and_nan():
    with pytest.raises(GeometryError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(GeometryError):
        TriMesh([[0, 0, np.nan], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def test_trimesh_arrays_are_read_only(sheet):
    with pytest.raises(ValueError):
        sheet.vertices[0, 0] = 1.0


def test_validate_template_rejects_degenerate_face():
    mesh = TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]], name="flat")
    with pytest.raises(GeometryError, match="template area"):
        mesh.validate_template()


def test_sheet_normals_point_up(sheet):
    np.testing.assert_array_equal(vertex_normals(sheet), np.tile([0.0, 0.0, 1.0], (36, 1)))


def test_box_normals_point_outward(box):
    normals = vertex_normals(box)
    assert np.all(np.einsum("ij,ij->i", normals, box.vertices) > 0)


def test_icosphere_normals_follow_radius():
    sphere = make_icosphere(subdivisions=2)
    normals = vertex_normals(sphere)
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
    cosines = np.einsum("ij,ij->i", normals, sphere.vertices)
    assert cosines.min() > np.cos(np.radians(3.0))
    assert len(edge_set(sphere)) == 480


def test_isolated_vertex_gets_default_normal():
    mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]])
    np.testing.assert_array_equal(vertex_normals(mesh)[3], [0.0, 0.0, 1.0])


def test_edge_set_of_grid(sheet):
    edges = edge_set(sheet)
    # 5x6 horizontal + 6x5 vertical + 25 diagonals
    assert len(edges) == 85
    assert np.all(edges.edges[:, 0] < edges.edges[:, 1])
    assert np.all(np.diff(edges.edges[:, 0]) >= 0)
    np.testing.assert_allclose(edges.rest_lengths.min(), 40.0)


def test_root_normalization_inverts_apply(sheet):
    root = RootTransform.from_yaw(0.3, [10.0, -5.0, 2.0])
    world = sheet.with_vertices(root.apply(sheet.vertices))
    back = apply_root_normalization(world, root)
    np.testing.assert_allclose(back.vertices, sheet.vertices, atol=1e-9)
    np.testing.assert_array_equal(back.faces, sheet.faces)


def test_root_transform_rejects_reflection():
    with pytest.raises(GeometryError):
        RootTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_obj_save_load(tmp_path, box):
    path = tmp_path / "box.obj"
    save_obj(box, str(path))
    loaded = load_obj(str(path))
    np.testing.assert_allclose(loaded.vertices, box.vertices)
    np.testing.assert_array_equal(loaded.faces, box.faces)
    assert loaded.name == "box"

    first = path.read_bytes()
    save_obj(loaded, str(path))
    assert path.read_bytes() == first


def test_obj_reader_handles_slashes_negative_indices_and_unknown_records(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text("o tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\n"
                    "f 1/1/1 -2//1 -1\n")
    mesh = load_obj(str(path))
    np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])


def test_obj_reader_reports_quad_with_line(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(MeshFormatError) as info:
        load_obj(str(path))
    assert info.value.line == 5
    assert "quad.obj:5" in str(info.value)


def test_obj_reader_rejects_out_of_range_index(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")
    with pytest.raises(MeshFormatError, match="out of range"):
        load_obj(str(path))


def test_obj_reader_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_obj(str(tmp_path / "missing.obj"))
