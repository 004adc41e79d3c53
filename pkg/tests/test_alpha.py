import io

import numpy as np
import pytest

from isbm.alpha import (
    AlphaStep,
    discretize_alpha,
    format_alpha_inline,
    load_alpha_csv,
    parse_alpha_inline,
    save_alpha_csv,
    shift_alpha,
)


class TestAlphaStep:
    def test_right_continuous_evaluation(self):
        a = AlphaStep(np.array([0.0, 0.5]), np.array([0.9, 0.1]))
        assert a(0.0) == 0.9
        assert a(0.49999) == 0.9
        assert a(0.5) == 0.1
        assert a(2.0) == 0.1

    def test_vectorized_call(self):
        a = AlphaStep(np.array([0.0, 0.5]), np.array([0.9, 0.1]))
        assert np.allclose(a(np.array([0.0, 0.5, 0.75])), [0.9, 0.1, 0.1])

    @pytest.mark.parametrize(
        "starts,values",
        [
            ([0.1, 0.5], [0.5, 0.5]),
            ([0.0, 0.5, 0.5], [0.5, 0.5, 0.5]),
            ([0.0], [1.5]),
            ([0.0], [-0.1]),
        ],
    )
    def test_invalid_specs_rejected(self, starts, values):
        with pytest.raises(ValueError):
            AlphaStep(np.array(starts), np.array(values))


class TestDiscretize:
    def test_constant(self):
        a = discretize_alpha(lambda t: 0.3, 4)
        assert np.allclose(a.values, 0.3)

    def test_linear_two_pieces(self):
        a = discretize_alpha(lambda t: t, 2)
        assert np.allclose(a.starts, [0.0, 0.5])
        assert np.allclose(a.values, [0.0, 0.5])

    @pytest.mark.parametrize("n", [4, 16, 64])
    def test_linear_modulus(self, n):
        a = discretize_alpha(lambda t: t, n)
        ts = np.linspace(0.0, 1.0, 100_001)[:-1]
        observed = np.max(np.abs(a(ts) - ts))
        oracle = np.max(ts - np.floor(ts * n) / n)
        assert observed == pytest.approx(oracle)
        assert observed == pytest.approx(1.0 / n, abs=2e-5)

    def test_idempotent_on_aligned_step(self):
        a = AlphaStep(np.array([0.0, 0.25, 0.5, 0.75]), np.array([0.1, 0.9, 0.4, 0.6]))
        again = discretize_alpha(a, 4, horizon=1.0)
        assert again.equals(a)

    def test_out_of_range_evaluation_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            discretize_alpha(lambda t: 2 * t, 4)


class TestShift:
    def test_zero_shift_identity(self):
        a = parse_alpha_inline("0:0.9,0.5:0.1")
        assert shift_alpha(a, 0.0).equals(a)

    def test_half_shift_of_indicator(self):
        a = AlphaStep(np.array([0.0, 0.5]), np.array([1.0, 0.0]))
        shifted = shift_alpha(a, 0.5)
        assert np.allclose(shifted.starts, [0.0])
        assert np.allclose(shifted.values, [0.0])

    def test_pointwise_against_direct_evaluation(self):
        rng = np.random.default_rng(17)
        starts = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 1.0, 7))])
        a = AlphaStep(starts, rng.uniform(0, 1, 8))
        s = 0.3
        shifted = shift_alpha(a, s)
        for u in rng.uniform(0.0, 0.7, 100):
            assert shifted(u) == a(s + u)

    def test_negative_shift_rejected(self):
        with pytest.raises(ValueError):
            shift_alpha(AlphaStep.constant(0.5), -0.1)


class TestInlineGrammar:
    def test_parse_simple(self):
        a = parse_alpha_inline("0:0.5")
        assert a(0.7) == 0.5

    def test_parse_multi(self):
        a = parse_alpha_inline("0:0.9,0.5:0.1,0.75:0.4")
        assert np.allclose(a.starts, [0.0, 0.5, 0.75])

    def test_value_out_of_range_names_token(self):
        with pytest.raises(ValueError, match="0:1.5"):
            parse_alpha_inline("0:1.5")

    def test_missing_zero_start(self):
        with pytest.raises(ValueError, match="t=0"):
            parse_alpha_inline("0.2:0.5")

    @pytest.mark.parametrize("text", ["0:0.5,0.5", "0:a", "", "0:0.5,,1:0.2", "0:0.5,0.4:0.2,0.4:0.3"])
    def test_malformed_specs(self, text):
        with pytest.raises(ValueError):
            parse_alpha_inline(text)

    def test_format_roundtrip(self):
        a = parse_alpha_inline("0:0.9,0.5:0.1")
        again = parse_alpha_inline(format_alpha_inline(a))
        assert again.equals(a)


class TestCsvFormat:
    def test_roundtrip(self):
        a = parse_alpha_inline("0:0.9,0.25:0.3,0.5:0.1")
        buf = io.StringIO()
        save_alpha_csv(a, buf)
        back = load_alpha_csv(io.StringIO(buf.getvalue()))
        assert back.equals(a)
        assert buf.getvalue().splitlines()[0] == "t,alpha"

    def test_rejects_missing_zero_row(self):
        with pytest.raises(ValueError):
            load_alpha_csv(io.StringIO("t,alpha\n0.5,0.2\n"))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            load_alpha_csv(io.StringIO("t,alpha\n0.0,1.2\n"))
