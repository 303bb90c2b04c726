import numpy as np
import pytest

from metspredict.ingest import (
    Dataset,
    EncodingError,
    FeatureSchema,
    ImputationError,
    ParseError,
    SchemaError,
    SplitError,
    encode_and_clean,
    impute_mean,
    load_csv,
    preprocess,
    read_processed_csv,
    split_balanced,
    write_processed_csv,
)

HEADER = (
    "seqn,Age,Sex,Marital,Income,Race,WaistCirc,BMI,Albuminuria,UrAlbCr,"
    "UricAcid,BloodGlucose,HDL,Triglycerides,MetabolicSyndrome"
)

ROW_A = "1,45,Male,Married,3000,White,95.1,28.0,0,8.5,5.5,99,45,120,0"
ROW_B = "2,60,Female,Single,2500,Black,101.3,31.2,1,35.0,6.1,130,38,180,1"


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_two_row_file(self, tmp_path):
        raw = load_csv(write(tmp_path, f"{HEADER}\n{ROW_A}\n{ROW_B}\n"))
        assert len(raw) == 2
        assert raw.rows[0]["Sex"] == "Male"
        assert raw.rows[1]["BloodGlucose"] == "130"

    def test_missing_column_names_it(self, tmp_path):
        header = HEADER.replace("BMI,", "")
        row = ROW_A.replace("28.0,", "")
        with pytest.raises(SchemaError, match="BMI"):
            load_csv(write(tmp_path, f"{header}\n{row}\n"))

    def test_malformed_row_reports_line_number(self, tmp_path):
        with pytest.raises(ParseError, match="row 3"):
            load_csv(write(tmp_path, f"{HEADER}\n{ROW_A}\n1,2,3\n"))

    def test_header_matching_is_case_insensitive_and_trimmed(self, tmp_path):
        header = HEADER.lower().replace("seqn", " SEQN ")
        raw = load_csv(write(tmp_path, f"{header}\n{ROW_A}\n"))
        assert raw.rows[0]["seqn"] == "1"

    def test_empty_cell_is_missing_not_zero(self, tmp_path):
        row = ROW_A.replace(",3000,", ",,")
        raw = load_csv(write(tmp_path, f"{HEADER}\n{row}\n"))
        assert raw.rows[0]["Income"] is None

    def test_empty_file(self, tmp_path):
        with pytest.raises(ParseError, match="header"):
            load_csv(write(tmp_path, ""))

    def test_unknown_extra_column_warns(self, tmp_path):
        with pytest.warns(UserWarning, match="Bogus"):
            raw = load_csv(write(tmp_path, f"{HEADER},Bogus\n{ROW_A},x\n"))
        assert "Bogus" not in raw.rows[0]


class TestEncodeAndClean:
    def encode(self, tmp_path, *rows):
        raw = load_csv(write(tmp_path, "\n".join((HEADER,) + rows) + "\n"))
        return encode_and_clean(raw)

    def test_sex_female_is_one(self, tmp_path):
        table = self.encode(tmp_path, ROW_A, ROW_B)
        sex = table.schema.index("Sex")
        assert table.values[0, sex] == 0.0
        assert table.values[1, sex] == 1.0

    def test_race_black_is_two(self, tmp_path):
        table = self.encode(tmp_path, ROW_B)
        assert table.values[0, table.schema.index("Race")] == 2.0

    def test_unknown_category_is_an_error(self, tmp_path):
        bad = ROW_A.replace("White", "Martian")
        with pytest.raises(EncodingError, match="Martian"):
            self.encode(tmp_path, bad)

    def test_marital_status_dropped(self, tmp_path):
        table = self.encode(tmp_path, ROW_A)
        assert "Marital" not in table.schema.names
        assert len(table.schema.names) == 12

    def test_missing_label_row_rejected_with_warning(self, tmp_path):
        no_label = ROW_A[:-1]  # strips the label value
        with pytest.warns(UserWarning, match="label"):
            table = self.encode(tmp_path, no_label, ROW_B)
        assert len(table.labels) == 1

    def test_non_binary_label_is_an_error(self, tmp_path):
        with pytest.raises(EncodingError, match="0/1"):
            self.encode(tmp_path, ROW_A[:-1] + "2")

    def test_missing_cells_marked(self, tmp_path):
        row = ROW_A.replace(",3000,", ",,")
        table = self.encode(tmp_path, row)
        assert table.missing[0, table.schema.index("Income")]

    def test_encoding_round_trip_is_identity(self):
        schema = FeatureSchema.default()
        for feature, mapping in schema.encodings.items():
            for category, code in mapping.items():
                assert schema.decode(feature, code) == category


class TestImputeMean:
    def setup_method(self):
        self.schema = FeatureSchema.default()
        self.income = self.schema.index("Income")

    def matrix(self, column_values):
        n = len(column_values)
        values = np.ones((n, 12))
        missing = np.zeros((n, 12), dtype=bool)
        for i, v in enumerate(column_values):
            if v is None:
                values[i, self.income] = np.nan
                missing[i, self.income] = True
            else:
                values[i, self.income] = v
        return values, missing

    def test_single_missing_gets_column_mean(self):
        values, missing = self.matrix([1, 2, None, 3])
        out = impute_mean(values, missing, self.schema)
        assert out[2, self.income] == 2.0

    def test_no_missing_unchanged(self):
        values, missing = self.matrix([1, 2, 3])
        out = impute_mean(values, missing, self.schema)
        np.testing.assert_array_equal(out, values)

    def test_two_missing_both_get_mean(self):
        values, missing = self.matrix([4, None, None, 8])
        out = impute_mean(values, missing, self.schema)
        assert out[1, self.income] == 6.0
        assert out[2, self.income] == 6.0

    def test_entirely_missing_column_is_an_error(self):
        values, missing = self.matrix([None, None])
        with pytest.raises(ImputationError, match="Income"):
            impute_mean(values, missing, self.schema)

    def test_imputation_preserves_column_mean(self):
        rng = np.random.default_rng(0)
        raw = rng.normal(size=30)
        holes = rng.random(30) < 0.3
        values, missing = self.matrix([None if h else v for v, h in zip(raw, holes)])
        out = impute_mean(values, missing, self.schema)
        observed_mean = raw[~holes].mean()
        assert out[:, self.income].mean() == pytest.approx(observed_mean, abs=1e-12)

    def test_untouched_columns_keep_missing_markers(self):
        values, missing = self.matrix([1, 2])
        bmi = self.schema.index("BMI")
        values[0, bmi] = np.nan
        missing[0, bmi] = True
        out = impute_mean(values, missing, self.schema, columns=("Income",))
        assert np.isnan(out[0, bmi])


def make_labeled_dataset(n0, n1, seed=0):
    rng = np.random.default_rng(seed)
    n = n0 + n1
    return Dataset(
        X=rng.normal(size=(n, 3)),
        y=np.array([0] * n0 + [1] * n1),
        schema=FeatureSchema.generic(3),
        ids=np.arange(n),
    )


class TestSplitBalanced:
    def test_reference_size_arithmetic(self):
        # independent oracle: 2*floor(0.33*2401/2) counted directly
        n, frac = 2401, 0.33
        expected_test = 2 * int(np.floor(frac * n / 2))
        assert expected_test == 792
        ds = make_labeled_dataset(1580, 821)
        split = split_balanced(ds, frac, seed=1)
        assert len(split.test) == 792
        neg, pos = split.test.class_counts()
        assert neg == pos == 396

    def test_symmetric_toy_case(self):
        ds = make_labeled_dataset(6, 6)
        split = split_balanced(ds, 0.5, seed=0)
        assert len(split.test) == 6
        assert split.test.class_counts() == (3, 3)

    def test_insufficient_minority_reports_counts(self):
        ds = make_labeled_dataset(90, 10)
        with pytest.raises(SplitError, match="25") as exc:
            split_balanced(ds, 0.5, seed=0)
        assert "10" in str(exc.value)

    @pytest.mark.parametrize("seed", [0, 1, 7, 99])
    def test_partition_properties(self, seed):
        ds = make_labeled_dataset(40, 25)
        split = split_balanced(ds, 0.4, seed=seed)
        neg, pos = split.test.class_counts()
        assert neg == pos
        train_ids, test_ids = set(split.train.ids), set(split.test.ids)
        assert train_ids | test_ids == set(ds.ids)
        assert train_ids & test_ids == set()

    def test_same_seed_is_byte_identical(self):
        ds = make_labeled_dataset(40, 25)
        a = split_balanced(ds, 0.4, seed=5)
        b = split_balanced(ds, 0.4, seed=5)
        np.testing.assert_array_equal(a.train.X, b.train.X)
        np.testing.assert_array_equal(a.test.ids, b.test.ids)

    def test_different_seed_differs(self):
        ds = make_labeled_dataset(40, 25)
        a = split_balanced(ds, 0.4, seed=5)
        b = split_balanced(ds, 0.4, seed=6)
        assert not np.array_equal(a.test.ids, b.test.ids)


class TestProcessedRoundTrip:
    def test_bit_exact(self, tmp_path, sim_csv):
        ds = preprocess(sim_csv)
        p = tmp_path / "processed.csv"
        write_processed_csv(ds, p, "config deadbeef seed 1")
        back = read_processed_csv(p)
        np.testing.assert_array_equal(ds.X, back.X)
        np.testing.assert_array_equal(ds.y, back.y)
        np.testing.assert_array_equal(ds.ids, back.ids)
        assert p.read_text(encoding="utf-8").startswith("# config deadbeef seed 1\n")

    def test_wrong_file_rejected(self, tmp_path):
        p = tmp_path / "other.csv"
        p.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            read_processed_csv(p)


class TestDatasetValidation:
    def test_rejects_nan(self):
        with pytest.raises(SchemaError, match="missing"):
            Dataset(
                X=np.array([[1.0, np.nan]]),
                y=np.array([0]),
                schema=FeatureSchema.generic(2),
                ids=np.array([1]),
            )

    def test_rejects_bad_labels(self):
        with pytest.raises(SchemaError, match="0/1"):
            Dataset(
                X=np.ones((2, 2)),
                y=np.array([0, 2]),
                schema=FeatureSchema.generic(2),
                ids=np.arange(2),
            )
