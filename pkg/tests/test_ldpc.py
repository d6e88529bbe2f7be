import numpy as np
import pytest

from phnlink.exceptions import ConfigError
from phnlink.ldpc import LdpcCode, bundled_alist_path, read_alist, write_alist
from phnlink.phy import qam_hard_demap, qam_llr, qam_map


@pytest.fixture(scope="module")
def code():
    return LdpcCode.default()


class TestStructure:
    def test_dimensions_and_rate(self, code):
        assert code.n == 1296
        assert code.k == 648
        assert code.rate == pytest.approx(0.5)

    def test_bundled_alist_matches_default(self, code):
        loaded = LdpcCode.from_alist(bundled_alist_path())
        assert np.array_equal(loaded.h, code.h)

    def test_alist_round_trip(self, code, tmp_path):
        path = tmp_path / "h.alist"
        write_alist(code.h, path)
        assert np.array_equal(read_alist(path), code.h)


class TestEncode:
    def test_zero_message_zero_codeword(self, code):
        assert not code.encode(np.zeros(648, dtype=np.uint8)).any()

    def test_zero_syndrome(self, code):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cw = code.encode(rng.integers(0, 2, 648))
            assert not code.syndrome(cw).any()

    def test_linearity(self, code):
        rng = np.random.default_rng(1)
        a = rng.integers(0, 2, 648).astype(np.uint8)
        b = rng.integers(0, 2, 648).astype(np.uint8)
        assert np.array_equal(code.encode(a ^ b), code.encode(a) ^ code.encode(b))

    def test_systematic(self, code):
        rng = np.random.default_rng(2)
        msg = rng.integers(0, 2, 648).astype(np.uint8)
        assert np.array_equal(code.encode(msg)[:648], msg)

    def test_wrong_length(self, code):
        with pytest.raises(ConfigError):
            code.encode(np.zeros(100, dtype=np.uint8))


class TestDecode:
    def test_noiseless_recovery_one_iteration(self, code):
        rng = np.random.default_rng(3)
        cw = code.encode(rng.integers(0, 2, 648))
        llr = np.where(cw == 0, 20.0, -20.0)
        hard, converged, iters = code.decode(llr)
        assert converged
        assert iters == 1
        assert np.array_equal(hard, cw)

    def test_single_flip_corrected(self, code):
        rng = np.random.default_rng(4)
        cw = code.encode(rng.integers(0, 2, 648))
        llr = np.where(cw == 0, 20.0, -20.0)
        llr[321] = -llr[321]
        hard, converged, iters = code.decode(llr, max_iters=10)
        assert converged
        assert iters <= 10
        assert np.array_equal(hard, cw)

    def test_idempotent_on_valid_codeword(self, code):
        rng = np.random.default_rng(5)
        cw = code.encode(rng.integers(0, 2, 648))
        llr = np.where(cw == 0, 8.0, -8.0)
        hard, converged, _ = code.decode(llr)
        assert converged
        assert np.array_equal(hard, cw)

    def test_nonconvergence_flagged(self, code):
        rng = np.random.default_rng(6)
        llr = rng.standard_normal(1296) * 0.1
        hard, converged, iters = code.decode(llr, max_iters=3)
        assert iters == 3
        assert hard.shape == (1296,)
        assert not converged

    def test_non_finite_rejected(self, code):
        llr = np.zeros(1296)
        llr[0] = np.inf
        with pytest.raises(ConfigError):
            code.decode(llr)


class TestCodingGain:
    def test_coded_beats_uncoded_16qam_awgn(self, code):
        # Single-antenna AWGN link at SNR 10 dB, 16-QAM, > 1e5 bits.
        rng = np.random.default_rng(7)
        snr_db = 10.0
        sigma2 = 10 ** (-snr_db / 10)
        raw_errors = raw_bits = 0
        coded_errors = coded_bits = 0
        for _ in range(80):  # 80 codewords > 1e5 bits
            msg = rng.integers(0, 2, code.k).astype(np.uint8)
            cw = code.encode(msg)
            sym = qam_map(cw, 16)
            noise = np.sqrt(sigma2 / 2) * (
                rng.standard_normal(sym.size) + 1j * rng.standard_normal(sym.size)
            )
            rx = sym + noise
            raw = qam_hard_demap(rx, 16)
            raw_errors += int(np.sum(raw != cw))
            raw_bits += cw.size
            llr = qam_llr(rx, 16, sigma2)
            hard, _conv, _ = code.decode(llr)
            coded_errors += int(np.sum(hard[: code.k] != msg))
            coded_bits += code.k
        assert raw_bits > 1e5
        raw_ber = raw_errors / raw_bits
        coded_ber = coded_errors / coded_bits
        assert raw_ber > 1e-3  # the channel is genuinely noisy
        assert coded_ber < raw_ber
        assert coded_ber < 0.1 * raw_ber
