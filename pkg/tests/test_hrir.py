import numpy as np
import pytest

from srirkit import wavio
from srirkit.grids import fibonacci_grid
from srirkit.hrir import HrirSet, load_hrir_set, spherical_head_hrir_set

FS = 48000.0


class TestSphericalHeadModel:
    def test_shape_and_rate(self):
        dirs = fibonacci_grid(16).directions
        hrirs = spherical_head_hrir_set(dirs, sample_rate=FS, length=128)
        assert len(hrirs) == 16
        assert hrirs.length == 128
        assert hrirs.sample_rate == FS

    def test_left_source_leads_and_louder_left(self):
        dirs = np.array([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
        hrirs = spherical_head_hrir_set(dirs, sample_rate=FS, length=128)
        left_peak = int(np.argmax(np.abs(hrirs.left[0])))
        right_peak = int(np.argmax(np.abs(hrirs.right[0])))
        assert left_peak < right_peak  # source at +Y reaches the left ear first
        assert np.abs(hrirs.left[0]).max() > np.abs(hrirs.right[0]).max()

    def test_left_right_mirror_symmetry(self):
        dirs = np.array([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
        hrirs = spherical_head_hrir_set(dirs, sample_rate=FS, length=128)
        assert np.allclose(hrirs.left[0], hrirs.right[1], atol=1e-12)
        assert np.allclose(hrirs.right[0], hrirs.left[1], atol=1e-12)

    def test_frontal_symmetric(self):
        dirs = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        hrirs = spherical_head_hrir_set(dirs, sample_rate=FS, length=128)
        for i in range(2):
            assert np.allclose(hrirs.left[i], hrirs.right[i], atol=1e-12)

    def test_nearest_index(self):
        dirs = fibonacci_grid(32).directions
        hrirs = spherical_head_hrir_set(dirs, sample_rate=FS)
        for i in (0, 7, 31):
            assert hrirs.nearest_index(dirs[i]) == i


class TestHrirSetValidation:
    def test_duplicate_directions_rejected(self):
        dirs = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            HrirSet(dirs, np.zeros((2, 8)), np.zeros((2, 8)), FS)

    def test_shape_mismatch_rejected(self):
        dirs = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        with pytest.raises(ValueError):
            HrirSet(dirs, np.zeros((2, 8)), np.zeros((3, 8)), FS)


class TestLoaders:
    def _reference_set(self, n=6):
        # distinct, easily recomputed directions on the horizontal plane + poles
        az = [0.0, 60.0, 120.0, 180.0, -120.0, -60.0][:n]
        el = [0.0] * n
        rows = list(zip(az, el))
        dirs = np.array([
            [np.cos(np.radians(a)), np.sin(np.radians(a)), 0.0] for a, _ in rows
        ])
        hrirs = spherical_head_hrir_set(dirs, sample_rate=FS, length=64)
        return rows, hrirs

    def test_per_file_layout(self, tmp_path):
        rows, hrirs = self._reference_set()
        lines = ["# azimuth_deg, elevation_deg, filename"]
        for i, (a, e) in enumerate(rows):
            name = f"hrir_{i:02d}.wav"
            wavio.write_wav(
                tmp_path / name,
                np.stack([hrirs.left[i], hrirs.right[i]]),
                int(FS),
            )
            lines.append(f"{a},{e},{name}")
        index = tmp_path / "index.csv"
        index.write_text("\n".join(lines) + "\n")

        loaded = load_hrir_set(index)
        assert len(loaded) == len(rows)
        assert loaded.sample_rate == FS
        assert np.abs(loaded.directions - hrirs.directions).max() < 1e-9
        assert np.abs(loaded.left - hrirs.left).max() < 1e-6  # float32 storage

    def test_interleaved_multichannel_layout(self, tmp_path):
        rows, hrirs = self._reference_set()
        interleaved = np.empty((2 * len(rows), hrirs.length))
        interleaved[0::2] = hrirs.left
        interleaved[1::2] = hrirs.right
        wav_path = tmp_path / "bank.wav"
        wavio.write_wav(wav_path, interleaved, int(FS))
        index = tmp_path / "index.csv"
        index.write_text("\n".join(f"{a},{e}" for a, e in rows) + "\n")

        loaded = load_hrir_set(index, wav_path)
        assert len(loaded) == len(rows)
        assert np.abs(loaded.right - hrirs.right).max() < 1e-6

    def test_channel_count_mismatch_rejected(self, tmp_path):
        rows, hrirs = self._reference_set()
        wav_path = tmp_path / "bank.wav"
        wavio.write_wav(wav_path, hrirs.left, int(FS))  # not 2n channels
        index = tmp_path / "index.csv"
        index.write_text("\n".join(f"{a},{e}" for a, e in rows) + "\n")
        with pytest.raises(ValueError):
            load_hrir_set(index, wav_path)

    def test_empty_index_rejected(self, tmp_path):
        index = tmp_path / "index.csv"
        index.write_text("# only comments\n")
        with pytest.raises(ValueError):
            load_hrir_set(index)

    def test_non_stereo_file_rejected(self, tmp_path):
        wavio.write_wav(tmp_path / "mono.wav", np.zeros((1, 32)), int(FS))
        index = tmp_path / "index.csv"
        index.write_text("0,0,mono.wav\n")
        with pytest.raises(ValueError):
            load_hrir_set(index)
