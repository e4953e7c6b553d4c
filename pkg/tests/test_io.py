import datetime as dt
import math

import pytest

from heavytail import dist, fit, io
from heavytail.copula import EFGM
from heavytail.exceptions import ConfigError, DatasetValidationError, EmptyDatasetError

HEADER = "record_id,event_date,entity_category,loss_amount\n"


def write(tmp_path, text, name="losses.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_round_trip_of_synthetic_records(tmp_path):
    path = tmp_path / "synth.csv"
    made = io.synth_dataset(dist.LogNormal(1.0, 2.0), 1000, seed=1, path=path)
    loaded = io.load_losses(path)
    assert loaded.records == made.records
    assert loaded.metadata == made.metadata
    assert loaded.metadata["seed"] == "1"


def test_optional_fields_round_trip(tmp_path):
    ds = io.LossDataset((
        io.LossRecord("a", 1.5, dt.date(2019, 3, 4), "retail"),
        io.LossRecord("b", 2e-7),
    ), {"unit": "records"})
    path = tmp_path / "x.csv"
    io.write_losses(ds, path)
    assert io.load_losses(path) == ds


def test_negative_loss_names_the_row(tmp_path):
    path = write(tmp_path, HEADER + "r1,,,3.0\nr2,,,-5\n")
    with pytest.raises(DatasetValidationError) as info:
        io.load_losses(path)
    assert info.value.line == 3
    assert info.value.field == "loss_amount"
    assert "line 3" in str(info.value)


@pytest.mark.parametrize("row,field", [
    ("r1,2020-13-01,,3.0", "event_date"),
    ("r1,,,abc", "loss_amount"),
    (",,,3.0", "record_id"),
    ("r1,,,0", "loss_amount"),
])
def test_malformed_rows(tmp_path, row, field):
    with pytest.raises(DatasetValidationError) as info:
        io.load_losses(write(tmp_path, HEADER + row + "\n"))
    assert info.value.field == field and info.value.line == 2


def test_wrong_field_count_and_header(tmp_path):
    with pytest.raises(DatasetValidationError):
        io.load_losses(write(tmp_path, HEADER + "r1,3.0\n"))
    with pytest.raises(DatasetValidationError):
        io.load_losses(write(tmp_path, "id,amount\nr1,3.0\n"))


def test_duplicate_ids(tmp_path):
    with pytest.raises(DatasetValidationError) as info:
        io.load_losses(write(tmp_path, HEADER + "r1,,,1\nr1,,,2\n"))
    assert info.value.line == 3


def test_header_only_file(tmp_path):
    with pytest.raises(EmptyDatasetError):
        io.load_losses(write(tmp_path, "# unit: usd\n" + HEADER))


def test_comments_and_blank_lines(tmp_path):
    ds = io.load_losses(write(tmp_path, "# unit: usd\n\n" + HEADER + "# note\nr1,,,2.5\n"))
    assert ds.metadata == {"unit": "usd"}
    assert ds.amounts().tolist() == [2.5]


def test_single_record_file(tmp_path):
    path = tmp_path / "one.csv"
    io.synth_dataset(dist.PowerLaw(1.0), 1, seed=2, path=path)
    assert len(io.load_losses(path)) == 1


def test_synthesis_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.synth_dataset(dist.GPD(0.1862, 1.0, 0.0), 9015, seed=3, path=a)
    io.synth_dataset(dist.GPD(0.1862, 1.0, 0.0), 9015, seed=3, path=b)
    assert a.read_bytes() == b.read_bytes()


def test_synthesis_rejects_signed_spec():
    with pytest.raises(DatasetValidationError):
        io.synth_dataset(dist.Normal(0, 1), 100, seed=4)


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        io.synth_dataset(dist.PowerLaw(1.0), 5, seed=1, path=tmp_path / "missing" / "x.csv")


def test_gpd_file_hill_extreme_value_index(tmp_path):
    path = tmp_path / "gpd.csv"
    io.synth_dataset(dist.GPD(0.1862, 1.0, 0.0), 9015, seed=5, path=path)
    est = fit.HillEstimator(0.1).fit(io.load_losses(path).amounts())
    assert abs(est.extreme_value_index_ - 0.1862) < 0.05


def test_gpd_file_mle_shape(tmp_path):
    path = tmp_path / "gpd.csv"
    io.synth_dataset(dist.GPD(0.1862, 1.0, 0.0), 9015, seed=5, path=path)
    report = fit.fit_mle("gpd", io.load_losses(path).amounts())
    assert abs(report.params["shape"] - 0.1862) < 0.05


def test_powerlaw_file_hill_tail_index(tmp_path):
    path = tmp_path / "pl.csv"
    io.synth_dataset(dist.PowerLaw(0.1862), 9015, seed=6, path=path)
    assert abs(fit.hill_tail_index(io.load_losses(path).amounts()).tail_index - 0.1862) < 0.05


def test_config_parsing():
    text = """
    # comment
    seed = 7
    mc_count = 1e5
    levels = 0.99, 0.995
    n_sweep = 1..3, 10   # trailing comment
    dist.family = stable
    dist.alpha = 0.7
    dist.scale = 1
    copula.gamma = 0.25
    liability.cap = 60
    curtail.support = none
    """
    cfg = io.config_from_pairs(io.parse_config_text(text), env={})
    assert cfg.seed == 7 and cfg.mc_count == 100_000
    assert cfg.levels == (0.99, 0.995)
    assert cfg.n_sweep == (1, 2, 3, 10)
    assert cfg.dist == dist.Stable(0.7, 1.0, 0.0, 0.0)
    assert cfg.copula == EFGM(2, 0.25)
    assert cfg.liability.cap == 60.0
    assert cfg.curtailment is None


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "seed = 1\nseed = 2",
    "no equals sign",
    "dist.family = weibull",
    "dist.family = normal\ndist.alpha = 2",
    "dist.family = normal\ndist.stdev = -1",
    "levels = 1.5",
    "copula.gamma = 3",
    "seed = x",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        io.config_from_pairs(io.parse_config_text(text), env={})


def test_environment_seed_override(tmp_path):
    path = write(tmp_path, "seed = 1\n", "run.cfg")
    assert io.load_config(path, env={"HEAVYTAIL_SEED": "42"}).seed == 42
    assert io.load_config(path, env={"HEAVYTAIL_SEED": "42"}, seed=9).seed == 9
    with pytest.raises(ConfigError):
        io.load_config(path, env={"HEAVYTAIL_SEED": "abc"})


def test_config_hash_tracks_content():
    a = io.config_from_pairs({"seed": "1"}, env={})
    b = io.config_from_pairs({"seed": "1"}, env={})
    c = io.config_from_pairs({"seed": "2"}, env={})
    assert a.config_hash() == b.config_hash() != c.config_hash()


GOLDEN_RESULTS = (
    "schema_version,experiment,series,parameter,value,metric,estimate,ci_low,ci_high,verdict\n"
    "1,var-sweep,normal,n,1,VaR@0.995,2.5758293035489004,2.5,2.65,\n"
    "1,var-sweep,normal,kendall_tau,n,trend:VaR@0.995,-1.0,,,strictly-decreasing\n"
)


def test_result_schema_golden(tmp_path):
    rows = [
        io.ResultRow("var-sweep", "normal", "n", 1, "VaR@0.995", 2.5758293035489004, 2.5, 2.65),
        io.ResultRow("var-sweep", "normal", "kendall_tau", "n", "trend:VaR@0.995", -1.0, verdict="strictly-decreasing"),
    ]
    path = tmp_path / "r.csv"
    io.write_results(rows, path)
    assert path.read_text(encoding="utf-8") == GOLDEN_RESULTS
    back = io.read_results(path)
    assert back[0] == rows[0]
    assert back[1].verdict == "strictly-decreasing" and math.isnan(back[1].ci_low)


def test_result_reader_rejects_unknown_version(tmp_path):
    path = write(tmp_path, GOLDEN_RESULTS.replace("\n1,", "\n2,", 1), "r.csv")
    with pytest.raises(DatasetValidationError):
        io.read_results(path)


def test_manifest_contents(tmp_path):
    cfg = io.config_from_pairs({"seed": "5"}, env={})
    m = io.write_manifest(cfg, "fit", tmp_path / "m.json", ["fit.csv"], 0)
    assert m["seed"] == 5 and m["config_hash"] == cfg.config_hash()
    assert set(m["versions"]) >= {"numpy", "scipy", "scikit-learn", "heavytail"}
    assert dt.datetime.fromisoformat(m["created_at"]).tzinfo is not None
