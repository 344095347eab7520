import math

import numpy as np
import numpy.testing as npt
import pytest

from doublecal.frame import (
    ColumnMap,
    CsvError,
    Frame,
    FrameError,
    compute_totals,
    export_csv,
    ingest_csv,
    validate,
)
from doublecal.simgen import ScenarioConfig, generate_population

from conftest import random_frame


def three_unit_frame(in_b=(True, True, True)):
    return Frame.from_arrays(
        y=[1.0, 2.0, 3.0],
        z=[[1.0, 2.0], [1.0, 4.0], [1.0, 6.0]],
        x=[[1.0, 5.0], [1.0, 6.0], [1.0, 7.0]],
        in_b=in_b,
        r=[True, False, False],
    )


def test_totals_full_coverage():
    t = compute_totals(three_unit_frame())
    npt.assert_array_equal(t.t_z, [3.0, 12.0])
    npt.assert_array_equal(t.t_z_b, [3.0, 12.0])


def test_totals_partial_coverage():
    t = compute_totals(three_unit_frame(in_b=(True, True, False)))
    npt.assert_array_equal(t.t_z, [3.0, 12.0])
    npt.assert_array_equal(t.t_z_b, [2.0, 6.0])
    npt.assert_array_equal(t.t_x_b, [2.0, 11.0])
    npt.assert_array_equal(t.t_x_nr, [1.0, 6.0])


def test_validate_flags_respondent_outside_b():
    f = Frame.from_arrays(y=[1.0, 2.0], z=[1.0, 2.0], x=[3.0], in_b=[True, False], r=[False, True])
    assert any("respondent outside U_B" in p for p in validate(f))


def test_validate_accepts_intercepted_frame():
    f = three_unit_frame()
    assert f.intercept
    assert validate(f) == []


def test_validate_catches_broken_intercept():
    f = Frame.from_arrays(y=[1.0, 2.0], z=[[1.0, 2.0], [2.0, 3.0]], x=[[1.0], [1.0]])
    assert validate(f, require_intercept=True)


def test_generated_frame_is_valid():
    gen = generate_population(ScenarioConfig(n_total=500, n_b=300, n_resp=100), 3)
    assert validate(gen.frame) == []


def test_compute_totals_rejects_invalid():
    f = Frame.from_arrays(y=[1.0, 2.0], z=[1.0, 2.0], x=[3.0], in_b=[True, False], r=[False, True])
    with pytest.raises(FrameError):
        compute_totals(f)


def test_totals_match_naive_summation():
    gen = generate_population(ScenarioConfig(n_total=10_000, n_b=7_500, n_resp=2_250), 11)
    f = gen.frame
    t = compute_totals(f)
    naive = [math.fsum(float(f.z[j, m]) for j in range(f.n_total)) for m in range(f.z_dim)]
    npt.assert_allclose(t.t_z, naive, rtol=1e-12)
    naive_b = [math.fsum(float(f.x[j, k]) for j in range(f.n_total) if f.in_b[j]) for k in range(f.x_dim)]
    npt.assert_allclose(t.t_x_b, naive_b, rtol=1e-12)


def test_totals_additive_over_partition(rng):
    f = random_frame(rng, n_total=80, n_b=50, n_resp=30)
    # split so that each part keeps at least one U_B unit
    rows = np.arange(f.n_total)
    part = rows % 2 == 0
    whole = compute_totals(f)
    a, b = compute_totals(f.subset(rows[part])), compute_totals(f.subset(rows[~part]))
    for name in ("t_z", "t_z_b", "t_x_b", "t_x_nr"):
        npt.assert_allclose(getattr(a, name) + getattr(b, name), getattr(whole, name), rtol=1e-12)


def test_nonrespondent_plus_respondent_x_total(rng):
    f = random_frame(rng)
    t = compute_totals(f)
    resp_total = f.x[f.in_b & f.r].sum(axis=0)
    npt.assert_allclose(t.t_x_nr + resp_total, t.t_x_b, rtol=1e-12)


def test_units_view_matches_columns():
    f = three_unit_frame(in_b=(True, True, False))
    units = list(f.units())
    assert units[2].x is None and units[0].x == (1.0, 5.0)
    assert units[1].z == (1.0, 4.0)


def test_frame_is_immutable():
    f = three_unit_frame()
    with pytest.raises(ValueError):
        f.y[0] = 10.0


def write(path, text):
    path.write_text(text)
    return path


SCHEMA = ColumnMap(x=("x1",), z=("z1",))


def test_ingest_complete_file(tmp_path):
    p = write(tmp_path / "f.csv", "id,y,in_b,r,x1,z1\na,1.5,1,1,2,3\nb,2.5,1,0,4,5\nc,,0,0,,6\n")
    f = ingest_csv(p, SCHEMA)
    assert f.n_total == 3 and f.n_b == 2
    assert np.isnan(f.y[2])


def test_ingest_rejects_respondent_without_y(tmp_path):
    p = write(tmp_path / "f.csv", "id,y,in_b,r,x1,z1\na,1.5,1,1,2,3\nb,,1,1,4,5\n")
    with pytest.raises(CsvError, match="row 3") as info:
        ingest_csv(p, SCHEMA)
    assert info.value.row == 3


def test_ingest_parse_error_location(tmp_path):
    p = write(tmp_path / "f.csv", "id,y,in_b,r,x1,z1\na,1.5,1,1,abc,3\n")
    with pytest.raises(CsvError) as info:
        ingest_csv(p, SCHEMA)
    assert info.value.row == 2 and info.value.column == "x1"


def test_ingest_schema_mismatch(tmp_path):
    p = write(tmp_path / "f.csv", "id,y,in_b,r,z1\na,1.5,1,1,3\n")
    with pytest.raises(CsvError, match="x1"):
        ingest_csv(p, SCHEMA)


def test_ingest_custom_missing_token(tmp_path):
    p = write(tmp_path / "f.csv", "id,y,in_b,r,x1,z1\na,1.5,1,1,2,3\nc,NA,0,0,NA,6\n")
    f = ingest_csv(p, ColumnMap(x=("x1",), z=("z1",), missing="NA"))
    assert np.isnan(f.y[1]) and np.isnan(f.x[1, 0])


def test_ingest_with_intercept_prepends_constant(tmp_path):
    p = write(tmp_path / "f.csv", "id,y,in_b,r,x1,z1\na,1.5,1,1,2,3\nc,,0,0,,6\n")
    f = ingest_csv(p, SCHEMA, with_intercept=True)
    npt.assert_array_equal(f.z[:, 0], [1.0, 1.0])
    assert f.x[0, 0] == 1.0 and np.isnan(f.x[1, 0])


def test_export_ingest_roundtrip(tmp_path):
    gen = generate_population(ScenarioConfig(n_total=400, n_b=300, n_resp=120), 5)
    schema = export_csv(gen.frame, tmp_path / "frame.csv")
    assert schema.x == ("x1",) and schema.z == ("z1",)
    back = ingest_csv(tmp_path / "frame.csv", schema, with_intercept=True)
    for name in ("y", "in_b", "r", "x", "z"):
        npt.assert_array_equal(getattr(back, name), getattr(gen.frame, name))
    t0, t1 = compute_totals(gen.frame), compute_totals(back)
    for name in ("t_z", "t_z_b", "t_x_b", "t_x_nr"):
        npt.assert_array_equal(getattr(t0, name), getattr(t1, name))
