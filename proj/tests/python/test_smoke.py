import numpy as np
import pytest
from PIL import Image, ImageEnhance, ImageOps

import autoaug


@pytest.fixture(scope="module")
def img():
    rng = np.random.default_rng(3)
    return rng.integers(0, 256, size=(24, 20, 3), dtype=np.uint8)


def pil(a):
    return Image.fromarray(a, "RGB")


def test_point_ops_match_pillow(img):
    p = pil(img)
    assert np.array_equal(autoaug.invert(img), np.asarray(ImageOps.invert(p)))
    assert np.array_equal(autoaug.solarize(img, 100), np.asarray(ImageOps.solarize(p, 100)))
    assert np.array_equal(autoaug.posterize(img, 3), np.asarray(ImageOps.posterize(p, 3)))
    assert np.array_equal(autoaug.equalize(img), np.asarray(ImageOps.equalize(p)))
    assert np.array_equal(autoaug.autocontrast(img), np.asarray(ImageOps.autocontrast(p)))


@pytest.mark.parametrize("kind,cls", [("contrast", ImageEnhance.Contrast), ("color", ImageEnhance.Color),
                                      ("brightness", ImageEnhance.Brightness),
                                      ("sharpness", ImageEnhance.Sharpness)])
@pytest.mark.parametrize("factor", [0.1, 0.9, 1.7])
def test_enhance_matches_pillow(img, kind, cls, factor):
    expect = np.asarray(cls(pil(img)).enhance(factor))
    assert np.array_equal(autoaug.enhance(img, kind, factor), expect)


def test_integer_translate(img):
    out = autoaug.affine(img, "translate_x", 3)
    assert np.array_equal(out[:, :-3], img[:, 3:])
    assert (out[:, -3:] == 128).all()


def test_policy_text_and_tokens():
    p = autoaug.parse_policy("(Invert,0.1,7)&(Contrast,0.2,6)\n(Rotate,0.7,2)&(TranslateX,0.3,9)\n")
    assert len(p) == 2
    assert str(autoaug.parse_policy(str(p))) == str(p)
    assert autoaug.Policy.from_json(p.to_json()) == p
    assert p.sub_policy(0)[0] == ("Invert", pytest.approx(0.1), 7)
    assert len(autoaug.op_names()) == 16
    with pytest.raises(ValueError, match="line 2"):
        autoaug.parse_policy("(Invert,0.1,7)&(Contrast,0.2,6)\n(Bogus,0.1,1)&(Invert,0.1,1)\n")


def test_codec_round_trip():
    tokens = [(i * 7) % 10 for i in range(30)]
    p = autoaug.decode_tokens(tokens)
    assert len(p) == 5
    assert autoaug.encode_policy(p) == tokens
    with pytest.raises(ValueError):
        autoaug.decode_tokens([99] * 30)


def test_search_space_size():
    assert autoaug.search_space_size(5) == str((16 * 10 * 11) ** 10)


def test_apply_policy_is_seeded(img):
    p = autoaug.parse_policy("(Rotate,0.5,5)&(Cutout,0.5,4)\n(Equalize,0.6,0)&(Color,0.9,8)\n")
    a = autoaug.apply_policy(p, img, 42)
    assert np.array_equal(a, autoaug.apply_policy(p, img, 42))
    assert a.shape == img.shape and a.dtype == np.uint8


def test_synth_and_child():
    train, val, test = autoaug.synth_invariance("invert", seed=1, train=20, val=10)
    assert len(train) == 20 and len(val) == 10
    image, label = train[0]
    assert image.shape == (32, 32, 3) and 0 <= label < 10
    acc = autoaug.child_accuracy(None, epochs=2)
    assert 0.0 <= acc <= 1.0


def test_bench_report():
    p = autoaug.parse_policy("(Invert,0.5,0)&(Solarize,0.5,4)\n")
    r = autoaug.bench(p, count=200, threads=2)
    assert r["count"] == 200 and r["deterministic"]
