import numpy as np
import pytest

from feedalign.rng import substream


class TestSubstream:
    def test_same_seed_and_label_repeat_exactly(self):
        a = substream(7, "weights").uniform(size=100)
        b = substream(7, "weights").uniform(size=100)
        np.testing.assert_array_equal(a, b)

    def test_labels_separate_streams(self):
        a = substream(7, "weights").uniform(size=100)
        b = substream(7, "shuffle").uniform(size=100)
        assert not np.array_equal(a, b)

    def test_seeds_separate_streams(self):
        a = substream(1, "weights").uniform(size=100)
        b = substream(2, "weights").uniform(size=100)
        assert not np.array_equal(a, b)

    def test_streams_do_not_interfere(self):
        # Drawing from one consumer's stream must not shift another's.
        fresh = substream(3, "weights").uniform(size=50)
        other = substream(3, "feedback:fa")
        other.uniform(size=1000)
        again = substream(3, "weights").uniform(size=50)
        np.testing.assert_array_equal(fresh, again)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            substream(-1, "weights")

    def test_label_hash_not_truncated_to_prefix(self):
        a = substream(0, "feedback:dfa").uniform(size=10)
        b = substream(0, "feedback:dfa-extra").uniform(size=10)
        assert not np.array_equal(a, b)
