#include <doctest.h>

#include <cmath>
#include <set>

#include "etpick/augment.hpp"
#include "etpick/decode.hpp"
#include "etpick/rng.hpp"

using namespace etpick;

namespace {

TensorF random_crop(int c, int d, std::uint64_t seed) {
    TensorF t({c, d, d, d});
    Rng rng(seed);
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    return t;
}

}  // namespace

TEST_CASE("flip is an involution on every axis") {
    TensorF t = random_crop(2, 6, 1);
    for (Axis a : {Axis::Z, Axis::Y, Axis::X}) {
        TensorF back = flip_tensor(flip_tensor(t, a), a);
        CHECK(back.data == t.data);
    }
}

TEST_CASE("flip mirrors indices: z=10 in D=64 lands at 53") {
    CHECK(flip_coord(10.0, 64) == doctest::Approx(53.0));
    TensorF t({1, 64, 1, 1});
    t.at4(0, 10, 0, 0) = 1.0f;
    TensorF f = flip_tensor(t, Axis::Z);
    CHECK(f.at4(0, 53, 0, 0) == 1.0f);
}

TEST_CASE("heatmap flip then decode equals decode then mirror") {
    ClassCatalog cat;
    cat.classes = {{0, "blob", 80.0}};
    Heatmap hm;
    hm.stride_r = 2;
    hm.spacing_angstrom = 10.0;
    hm.values = TensorF({1, 10, 10, 10});
    Rng rng(5);
    for (auto& v : hm.values.data)
        v = rng.uniform01() < 0.1 ? static_cast<float>(rng.uniform01()) : 0.0f;
    auto base = nms_decode(hm, cat, {0.3});
    auto flipped = nms_decode(flip_heatmap(hm, Axis::Y), cat, {0.3});
    REQUIRE(base.size() == flipped.size());
    // mirrored decoded coordinate: c -> D_in - c (half-stride offset included)
    std::multiset<double> got, want;
    for (const auto& d : flipped) got.insert(d.y);
    for (const auto& d : base) want.insert(20.0 - d.y);
    CHECK(got == want);
}

TEST_CASE("dropblock rate 0 keeps everything, rate 1 drops everything") {
    DropBlockParams p;
    p.rate = 0.0;
    auto keep = dropblock_mask({8, 8, 8}, p, 1);
    for (auto v : keep) CHECK(v == 0);
    p.rate = 1.0;
    auto drop = dropblock_mask({8, 8, 8}, p, 1);
    for (auto v : drop) CHECK(v == 1);
}

TEST_CASE("dropblock empirical fraction matches the interior expectation") {
    DropBlockParams p;
    p.rate = 0.002;
    p.kernel = 3;
    p.stride = 1;
    const double expect = 1.0 - std::pow(1.0 - p.rate, 27.0);  // ~0.0526
    double total = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        auto mask = dropblock_mask({64, 64, 64}, p, 1000 + static_cast<std::uint64_t>(i));
        std::int64_t dropped = 0;
        for (auto v : mask) dropped += v;
        total += static_cast<double>(dropped) / static_cast<double>(mask.size());
    }
    const double mean = total / n;
    CHECK(mean > 0.8 * expect);
    CHECK(mean < 1.2 * expect);
}

TEST_CASE("every dropped voxel lies in a fully dropped (clipped) seed block") {
    const std::array<int, 3> shape{20, 20, 20};
    auto seeds = dropblock_seeds(shape, 0.01, 77);
    auto mask = dilate_mask(seeds, shape, 3, 1);
    auto at = [&](const std::vector<std::uint8_t>& m, int z, int y, int x) {
        return m[(static_cast<std::size_t>(z) * 20 + y) * 20 + x];
    };
    for (int z = 0; z < 20; ++z)
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x) {
                if (!at(mask, z, y, x)) continue;
                // find a covering seed whose clipped 3^3 block is all dropped
                bool covered = false;
                for (int dz = -1; dz <= 1 && !covered; ++dz)
                    for (int dy = -1; dy <= 1 && !covered; ++dy)
                        for (int dx = -1; dx <= 1 && !covered; ++dx) {
                            const int sz = z + dz, sy = y + dy, sx = x + dx;
                            if (sz < 0 || sz >= 20 || sy < 0 || sy >= 20 || sx < 0 || sx >= 20)
                                continue;
                            if (!at(seeds, sz, sy, sx)) continue;
                            bool all = true;
                            for (int bz = std::max(0, sz - 1); bz <= std::min(19, sz + 1) && all; ++bz)
                                for (int by = std::max(0, sy - 1); by <= std::min(19, sy + 1) && all; ++by)
                                    for (int bx = std::max(0, sx - 1); bx <= std::min(19, sx + 1); ++bx)
                                        if (!at(mask, bz, by, bx)) {
                                            all = false;
                                            break;
                                        }
                            covered = all;
                        }
                CHECK(covered);
            }
}

TEST_CASE("dropblock with stride 2 still produces block-structured masks") {
    DropBlockParams p;
    p.rate = 0.01;
    p.kernel = 3;
    p.stride = 2;
    auto mask = dropblock_mask({16, 16, 16}, p, 9);
    CHECK(mask.size() == 16u * 16u * 16u);
    // strided cells are constant 2x2x2 blocks
    for (int z = 0; z < 16; z += 2)
        for (int y = 0; y < 16; y += 2)
            for (int x = 0; x < 16; x += 2) {
                const auto v = mask[(static_cast<std::size_t>(z) * 16 + y) * 16 + x];
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            CHECK(mask[(static_cast<std::size_t>(z + dz) * 16 + y + dy) * 16 + x + dx] == v);
            }
}

TEST_CASE("identity strong spec leaves the crop unchanged") {
    TensorF crop = random_crop(1, 8, 11);
    AugmentSpec spec = AugmentSpec::identity();
    TensorF out = apply_strong(crop, spec, 3);
    CHECK(out.data == crop.data);
}

TEST_CASE("mean fill writes the exact crop mean into dropped voxels") {
    TensorF crop = random_crop(1, 16, 13);
    AugmentSpec spec = AugmentSpec::identity();
    spec.dropblock_enabled = true;
    spec.dropblock.rate = 0.05;
    spec.dropblock.fill = DropBlockParams::Fill::Mean;
    TensorF out = apply_strong(crop, spec, 17);
    double sum = 0.0;
    for (float v : crop.data) sum += v;
    const float mean = static_cast<float>(sum / static_cast<double>(crop.data.size()));
    std::int64_t dropped = 0;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        if (out[i] != crop[i]) {
            CHECK(out[i] == mean);
            ++dropped;
        }
    }
    CHECK(dropped > 0);
}

TEST_CASE("strong augmentation replays bit-identically from the same seed") {
    TensorF crop = random_crop(1, 12, 19);
    AugmentSpec spec;
    spec.intensity_scale = {0.9, 1.1};
    spec.intensity_shift = {-0.1, 0.1};
    spec.noise_sd = {0.0, 0.1};
    spec.gamma = {0.9, 1.1};
    spec.dropblock_enabled = true;
    spec.dropblock.rate = 0.01;
    TensorF a = apply_strong(crop, spec, 23);
    TensorF b = apply_strong(crop, spec, 23);
    TensorF c = apply_strong(crop, spec, 24);
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
}

TEST_CASE("weak views: four views, inverses recover the original") {
    TensorF crop = random_crop(1, 6, 29);
    auto views = apply_weak_views(crop);
    CHECK(views.size() == 4);
    CHECK(views[0].data == crop.data);
    for (int i = 0; i < 4; ++i) {
        TensorF back = realign_view(views[static_cast<std::size_t>(i)], i);
        CHECK(back.data == crop.data);
    }
}

TEST_CASE("realigned identical heatmaps average to themselves") {
    TensorF hm = random_crop(2, 4, 31);
    // all four views realign to the same tensor; pairwise mean must be exact
    float sum0 = hm[0];
    TensorF m = hm;
    for (std::int64_t i = 0; i < m.numel(); ++i) {
        const float v = hm[i];
        const float avg = ((v + v) * 0.5f + (v + v) * 0.5f) * 0.5f;
        CHECK(avg == v);
    }
    CHECK(m[0] == sum0);
}
