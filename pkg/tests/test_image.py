import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conntest.image import (Image, connected_components, is_border_connected,
                            is_connected)
from conftest import image_from_rows


def naive_components(bits):
    """Union-find over 4-neighbors, independent of the library path."""
    side = bits.shape[0]
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for y in range(side):
        for x in range(side):
            if bits[y, x]:
                parent[(x, y)] = (x, y)
    for y in range(side):
        for x in range(side):
            if not bits[y, x]:
                continue
            if x + 1 < side and bits[y, x + 1]:
                union((x, y), (x + 1, y))
            if y + 1 < side and bits[y + 1, x]:
                union((x, y), (x, y + 1))
    return {find(p) for p in parent}


def test_empty_image_has_no_components():
    lab = connected_components(Image.blank(5))
    assert lab.count == 0
    assert is_connected(Image.blank(5))


def test_single_pixel():
    img = Image.blank(4).with_pixel(2, 1, True)
    lab = connected_components(img)
    assert lab.count == 1
    assert lab.labels[1, 2] == 1
    assert not lab.touches_border[0]
    assert is_connected(img)


def test_two_diagonal_pixels_are_separate():
    img = image_from_rows([
        "1 0 0",
        "0 1 0",
        "0 0 0",
    ])
    lab = connected_components(img)
    assert lab.count == 2
    assert not is_connected(img)


def test_labels_are_row_major_ordered():
    img = image_from_rows([
        "0 0 1",
        "0 0 0",
        "1 0 0",
    ])
    lab = connected_components(img)
    assert lab.labels[0, 2] == 1
    assert lab.labels[2, 0] == 2


def test_touches_border_flags():
    img = image_from_rows([
        "0 0 0 0",
        "0 1 1 0",
        "0 1 0 0",
        "0 0 0 1",
    ])
    lab = connected_components(img)
    assert lab.count == 2
    assert not lab.touches_border[0]
    assert lab.touches_border[1]
    assert not is_border_connected(img)


def test_component_pixels_lists_all():
    img = image_from_rows([
        "1 1 0",
        "0 1 0",
        "0 0 0",
    ])
    lab = connected_components(img)
    assert lab.component_pixels(1) == [(0, 0), (1, 0), (1, 1)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 40 - 1))
def test_component_count_matches_union_find(seed):
    gen = np.random.Generator(np.random.PCG64(seed))
    bits = gen.random((16, 16)) < 0.45
    assert connected_components(Image(bits)).count == len(naive_components(bits))


def test_probe_many_and_subimage():
    img = image_from_rows([
        "1 0 0 0",
        "0 1 1 0",
        "0 1 0 0",
        "0 0 0 1",
    ])
    xs = np.array([0, 1, 3, 2])
    ys = np.array([0, 1, 3, 0])
    assert img.probe_many(xs, ys).tolist() == [True, True, True, False]
    sub = img.subimage(1, 1, 2)
    assert sub.bits.tolist() == [[True, True], [True, False]]


def test_with_pixel_is_persistent():
    img = Image.blank(3)
    other = img.with_pixel(1, 1, True)
    assert not img.bits[1, 1]
    assert other.bits[1, 1]
