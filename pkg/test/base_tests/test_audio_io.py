import os

import numpy as np
import soundfile as sf

from chainsep.base.audio_io import read_wav, write_wav
from chainsep.base.errors import UnsupportedFormat, IoFailure, CorruptHeader
from chainsep.base.signals import TimeSignal
from chainsep.helper.base_test import ChainsepBaseTest


class AudioIoTests(ChainsepBaseTest):

    @classmethod
    def setUpClass(cls) -> None:
        cls.file = __file__
        super(AudioIoTests, cls).setUpClass()

    def setUp(self):
        rng = np.random.default_rng(3)
        self.signal = TimeSignal(rng.uniform(-0.9, 0.9, (8000, 2)), 8000)

    def test_float32_round_trip(self):
        path = os.path.join(self.tmp_folder_path, 'float.wav')
        expected = self.signal.samples.astype(np.float32).astype(np.float64)
        write_wav(path, TimeSignal(expected, 8000))
        loaded = read_wav(path)
        self.assertEqual(loaded.samples.shape, (8000, 2))
        self.assertEqual(loaded.sample_rate, 8000)
        self.assertEqual(np.max(np.abs(loaded.samples - expected)), 0.)

    def test_pcm16_round_trip(self):
        path = os.path.join(self.tmp_folder_path, 'pcm.wav')
        write_wav(path, self.signal, format='pcm16')
        loaded = read_wav(path)
        self.assertLessEqual(np.max(np.abs(loaded.samples - self.signal.samples)), 2. ** -15)

    def test_pcm16_normalization(self):
        path = os.path.join(self.tmp_folder_path, 'half.wav')
        sf.write(path, np.array([16384], dtype=np.int16), 8000, subtype='PCM_16', format='WAV')
        loaded = read_wav(path)
        self.assertEqual(loaded.samples[0, 0], 0.5)
        self.assertEqual(loaded.num_channels, 1)

    def test_unsupported_encoding(self):
        path = os.path.join(self.tmp_folder_path, 'ulaw.wav')
        sf.write(path, self.signal.samples, 8000, subtype='ULAW', format='WAV')
        with self.assertRaises(UnsupportedFormat):
            read_wav(path)

    def test_corrupt_file(self):
        path = os.path.join(self.tmp_folder_path, 'garbage.wav')
        with open(path, 'wb') as f:
            f.write(b'RIFF0000WAVEnot really a wave file')
        with self.assertRaises((CorruptHeader, UnsupportedFormat)):
            read_wav(path)

    def test_missing_file(self):
        with self.assertRaises(IoFailure):
            read_wav(os.path.join(self.tmp_folder_path, 'does_not_exist.wav'))

    def test_unwritable_directory(self):
        with self.assertRaises(IoFailure):
            write_wav(os.path.join(self.tmp_folder_path, 'no', 'such', 'dir', 'x.wav'), self.signal)

    def test_unknown_write_format(self):
        with self.assertRaises(UnsupportedFormat):
            write_wav(os.path.join(self.tmp_folder_path, 'x.wav'), self.signal, format='mp3')
