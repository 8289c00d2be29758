#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "coastcast/tensor.hpp"
#include "support/testutil.hpp"

using namespace coastcast;

TEST_CASE("create: fill and data factories") {
    TensorF z = TensorF::zeros({2, 2});
    CHECK(z.numel() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(z[i] == 0.0f);

    TensorF big = TensorF::full({10, 128, 128, 4}, 0.0f);
    CHECK(big.numel() == 655360);

    TensorF vals = TensorF::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(vals[3] == 4.0f);

    CHECK_THROWS_AS(TensorF::from_data({3}, {1, 2}), ShapeError);
    CHECK_THROWS_AS(TensorF::zeros({0, 3}), ShapeError);
}

TEST_CASE("reshape keeps values, rejects count changes") {
    TensorF t = TensorF::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    TensorF r = t.reshaped({3, 2});
    CHECK(r.shape == Shape{3, 2});
    CHECK(r.data == t.data);
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

TEST_CASE("concat: extents add on axis, order preserved") {
    TensorF a = TensorF::full({1, 8, 8, 32}, 1.0f);
    TensorF b = TensorF::full({1, 8, 8, 32}, 2.0f);
    TensorF c = tensor_concat_views<float>({&a, &b}, 3);
    CHECK(c.shape == Shape{1, 8, 8, 64});
    CHECK(c.data[0] == 1.0f);
    CHECK(c.data[32] == 2.0f);

    TensorF p = TensorF::full({1, 4, 4, 8}, 0.5f);
    TensorF q = tensor_concat_views<float>({&p, &p, &p}, 3);
    CHECK(q.shape == Shape{1, 4, 4, 24});

    TensorF bad = TensorF::zeros({1, 4, 4, 32});
    CHECK_THROWS_AS(tensor_concat_views<float>({&a, &bad}, 3), ShapeError);
}

TEST_CASE("concat along a middle axis lays rows out in argument order") {
    TensorF a = TensorF::from_data({2, 2}, {1, 2, 3, 4});
    TensorF b = TensorF::from_data({2, 1}, {9, 8});
    TensorF c = tensor_concat_views<float>({&a, &b}, 1);
    CHECK(c.shape == Shape{2, 3});
    CHECK(c.data == std::vector<float>{1, 2, 9, 3, 4, 8});
}

TEST_CASE("crop: selected extents, identity, bounds") {
    TensorF grid = TensorF::zeros({135, 135});
    for (std::size_t i = 0; i < grid.numel(); ++i) grid[i] = static_cast<float>(i);
    TensorF cropped = tensor_crop(grid, {{0, 128}, {0, 128}});
    CHECK(cropped.shape == Shape{128, 128});
    CHECK(cropped.data[0] == 0.0f);
    CHECK(cropped.data[128] == 135.0f);  // second row starts at source row 1

    TensorF same = tensor_crop(grid, {{0, 135}, {0, 135}});
    CHECK(same.data == grid.data);

    CHECK_THROWS_AS(tensor_crop(grid, {{0, 136}, {0, 135}}), ShapeError);
}

TEST_CASE("property: concat then crop reproduces every input bitwise") {
    std::mt19937_64 rng(7101);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t rank = 2 + rng() % 3;
        Shape base(rank);
        for (std::size_t a = 0; a < rank; ++a) base[a] = 1 + rng() % 4;
        const std::size_t axis = rng() % rank;
        const std::size_t n = 2 + rng() % 3;

        std::vector<TensorF> parts;
        for (std::size_t k = 0; k < n; ++k) {
            Shape s = base;
            s[axis] = 1 + rng() % 4;
            parts.push_back(coastcast::testing::rand_tensor<float>(rng, s));
        }
        TensorF whole = tensor_concat(parts, axis);

        std::size_t off = 0;
        for (const TensorF& part : parts) {
            std::vector<AxisRange> ranges;
            for (std::size_t a = 0; a < rank; ++a) {
                if (a == axis) {
                    ranges.push_back({off, off + part.shape[axis]});
                } else {
                    ranges.push_back({0, whole.shape[a]});
                }
            }
            TensorF slice = tensor_crop(whole, ranges);
            CHECK(slice.data == part.data);
            off += part.shape[axis];
        }
    }
}
