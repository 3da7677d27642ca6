#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "etpick/decode.hpp"
#include "etpick/rng.hpp"
#include "etpick/synth.hpp"

using namespace etpick;

namespace {

ClassCatalog one_class(double radius = 100.0) {
    ClassCatalog cat;
    cat.classes = {{0, "blob", radius}};
    return cat;
}

Heatmap make_heatmap(int c, int d, int h, int w, int R = 2, double spacing = 10.0) {
    Heatmap hm;
    hm.stride_r = R;
    hm.spacing_angstrom = spacing;
    hm.values = TensorF({c, d, h, w});
    return hm;
}

// Brute-force NMS oracle: value > threshold, value == max of the k-window,
// ties resolved toward the lexicographically smallest coordinate.
std::vector<std::array<int, 3>> brute_nms(const TensorF& v, int c, int k, double thr) {
    const int d = v.dim(1), h = v.dim(2), w = v.dim(3);
    const int r = k / 2;
    std::vector<std::array<int, 3>> out;
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float val = v.at4(c, z, y, x);
                if (val <= thr) continue;
                bool keep = true;
                for (int zz = std::max(0, z - r); zz <= std::min(d - 1, z + r) && keep; ++zz)
                    for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r) && keep; ++yy)
                        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                            const float o = v.at4(c, zz, yy, xx);
                            if (o > val ||
                                (o == val && (zz < z || (zz == z && (yy < y || (yy == y && xx < x)))))) {
                                keep = false;
                                break;
                            }
                        }
                if (keep) out.push_back({z, y, x});
            }
    return out;
}

// flood-fill component counter (independent of ccl_decode internals)
int count_components(const TensorF& v, int c, double thr) {
    const int d = v.dim(1), h = v.dim(2), w = v.dim(3);
    std::vector<char> seen(static_cast<std::size_t>(d) * h * w, 0);
    auto idx = [&](int z, int y, int x) { return (static_cast<std::size_t>(z) * h + y) * w + x; };
    int count = 0;
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (seen[idx(z, y, x)] || v.at4(c, z, y, x) <= thr) continue;
                ++count;
                std::vector<std::array<int, 3>> stack{{z, y, x}};
                seen[idx(z, y, x)] = 1;
                while (!stack.empty()) {
                    auto [cz, cy, cx] = stack.back();
                    stack.pop_back();
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int zz = cz + dz, yy = cy + dy, xx = cx + dx;
                                if (zz < 0 || zz >= d || yy < 0 || yy >= h || xx < 0 || xx >= w)
                                    continue;
                                if (seen[idx(zz, yy, xx)] || v.at4(c, zz, yy, xx) <= thr) continue;
                                seen[idx(zz, yy, xx)] = 1;
                                stack.push_back({zz, yy, xx});
                            }
                }
            }
    return count;
}

}  // namespace

TEST_CASE("nms kernel size per class: odd, >= 3, half-radius reach") {
    // radius 150 A, spacing 10, R=2 -> 7.5 out voxels -> reach 4 -> k 9
    CHECK(nms_kernel_for(ClassSpec{0, "ribo", 150.0}, 10.0, 2) == 9);
    // radius 60 -> 3 out voxels -> reach 2 (round half up) -> k 5
    CHECK(nms_kernel_for(ClassSpec{0, "af", 60.0}, 10.0, 2) == 5);
    // tiny radius clamps to 3
    CHECK(nms_kernel_for(ClassSpec{0, "small", 10.0}, 10.0, 2) == 3);
}

TEST_CASE("all-zero heatmap decodes to nothing") {
    Heatmap hm = make_heatmap(1, 8, 8, 8);
    CHECK(nms_decode(hm, one_class(), {0.5}).empty());
    CHECK(ccl_decode(hm, one_class(), {0.5}).empty());
}

TEST_CASE("single spike maps back through the stride with half-stride offset") {
    Heatmap hm = make_heatmap(1, 16, 16, 16);
    hm.values.at4(0, 5, 5, 5) = 0.9f;
    auto dets = nms_decode(hm, one_class(), {0.5});
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].z == doctest::Approx(11.0));
    CHECK(dets[0].y == doctest::Approx(11.0));
    CHECK(dets[0].x == doctest::Approx(11.0));
    CHECK(dets[0].confidence == doctest::Approx(0.9));

    auto cdets = ccl_decode(hm, one_class(), {0.5});
    REQUIRE(cdets.size() == 1);
    CHECK(cdets[0].z == doctest::Approx(11.0));
    CHECK(cdets[0].confidence == doctest::Approx(0.9));
}

TEST_CASE("the stronger of two spikes in one window wins") {
    Heatmap hm = make_heatmap(1, 16, 16, 16);
    hm.values.at4(0, 5, 5, 5) = 0.9f;
    hm.values.at4(0, 5, 5, 7) = 0.8f;  // k=9 window covers both
    auto dets = nms_decode(hm, one_class(180.0), {0.5});
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].confidence == doctest::Approx(0.9));
}

TEST_CASE("plateau ties resolve to the lexicographically smallest voxel") {
    Heatmap hm = make_heatmap(1, 8, 8, 8);
    hm.values.at4(0, 3, 3, 3) = 0.7f;
    hm.values.at4(0, 3, 3, 4) = 0.7f;
    auto dets = nms_decode(hm, one_class(40.0), {0.5});  // k=3 for small radius
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].x == doctest::Approx(2 * 3 + 1));
}

TEST_CASE("nms matches the brute-force oracle on random heatmaps") {
    Rng rng(71);
    for (int trial = 0; trial < 12; ++trial) {
        Heatmap hm = make_heatmap(2, 16, 16, 16);
        for (auto& v : hm.values.data)
            v = rng.uniform01() < 0.1f ? static_cast<float>(rng.uniform01()) : 0.0f;
        ClassCatalog cat;
        cat.classes = {{0, "a", 60.0}, {1, "b", 150.0}};
        auto dets = nms_decode(hm, cat, {0.3});
        for (int c = 0; c < 2; ++c) {
            const int k = nms_kernel_for(cat.spec(c), hm.spacing_angstrom, hm.stride_r);
            auto oracle = brute_nms(hm.values, c, k, 0.3);
            std::vector<std::array<int, 3>> got;
            for (const auto& det : dets)
                if (det.class_id == c)
                    got.push_back({static_cast<int>((det.z - 1.0) / 2),
                                   static_cast<int>((det.y - 1.0) / 2),
                                   static_cast<int>((det.x - 1.0) / 2)});
            CHECK(got == oracle);
        }
    }
}

TEST_CASE("quantized plateaus: nms still matches the oracle") {
    Rng rng(73);
    for (int trial = 0; trial < 8; ++trial) {
        Heatmap hm = make_heatmap(1, 12, 12, 12);
        for (auto& v : hm.values.data)
            v = static_cast<float>(std::floor(rng.uniform01() * 4.0) / 4.0);  // many ties
        auto dets = nms_decode(hm, one_class(60.0), {0.4});
        const int k = nms_kernel_for(one_class(60.0).spec(0), 10.0, 2);
        auto oracle = brute_nms(hm.values, 0, k, 0.4);
        REQUIRE(dets.size() == oracle.size());
        for (std::size_t i = 0; i < dets.size(); ++i) {
            CHECK(static_cast<int>((dets[i].z - 1.0) / 2) == oracle[i][0]);
            CHECK(static_cast<int>((dets[i].x - 1.0) / 2) == oracle[i][2]);
        }
    }
}

TEST_CASE("ccl merges touching blobs into one detection (undersegmentation)") {
    Heatmap hm = make_heatmap(1, 16, 16, 16);
    // two peaks joined by an above-threshold saddle: one 26-connected blob
    hm.values.at4(0, 5, 5, 4) = 0.9f;
    hm.values.at4(0, 5, 5, 5) = 0.8f;
    hm.values.at4(0, 5, 5, 6) = 0.7f;
    hm.values.at4(0, 5, 5, 7) = 0.8f;
    hm.values.at4(0, 5, 5, 8) = 0.6f;
    CHECK(count_components(hm.values, 0, 0.5) == 1);
    auto dets = ccl_decode(hm, one_class(), {0.5});
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].confidence == doctest::Approx(0.9));
    // nms with a small kernel sees two peaks
    auto nms = nms_decode(hm, one_class(40.0), {0.5});
    CHECK(nms.size() == 2);
}

TEST_CASE("ccl component count equals the flood-fill oracle on random fixtures") {
    Rng rng(79);
    for (int trial = 0; trial < 6; ++trial) {
        Heatmap hm = make_heatmap(1, 14, 14, 14);
        for (auto& v : hm.values.data) v = rng.uniform01() < 0.15 ? 1.0f : 0.0f;
        auto dets = ccl_decode(hm, one_class(), {0.5});
        CHECK(static_cast<int>(dets.size()) == count_components(hm.values, 0, 0.5));
    }
}

TEST_CASE("plan_tiles reproduces the reference tiling arithmetic") {
    VolumeMeta meta{{183, 650, 650}, 10.0};
    TilePlan plan = plan_tiles(meta, {90, 90, 90}, 0.25);
    CHECK(plan.starts[0] == std::vector<int>{0, 67, 93});
    // every voxel covered, weights sum to one
    for (int pos = 0; pos < 183; ++pos) CHECK(plan.coverage(0, pos) >= 1);
}

TEST_CASE("window equal to dims gives a single tile at the origin") {
    VolumeMeta meta{{64, 64, 64}, 10.0};
    TilePlan plan = plan_tiles(meta, {64, 64, 64}, 0.25);
    CHECK(plan.tiles().size() == 1);
    CHECK(plan.tiles()[0] == std::array<int, 3>{0, 0, 0});
}

TEST_CASE("zero overlap with dividing window partitions the volume") {
    VolumeMeta meta{{64, 64, 64}, 10.0};
    TilePlan plan = plan_tiles(meta, {32, 32, 32}, 0.0);
    CHECK(plan.starts[0] == std::vector<int>{0, 32});
    for (int pos = 0; pos < 64; ++pos) CHECK(plan.coverage(0, pos) == 1);
}

TEST_CASE("per-voxel blend weights sum to 1 under overlap") {
    VolumeMeta meta{{96, 80, 64}, 10.0};
    TilePlan plan = plan_tiles(meta, {48, 48, 48}, 0.25, 2);
    for (int axis = 0; axis < 3; ++axis)
        for (int pos = 0; pos < meta.dims[static_cast<std::size_t>(axis)]; ++pos) {
            const int cov = plan.coverage(axis, pos);
            REQUIRE(cov >= 1);
            // weight of each covering tile is 1/cov; total = cov * 1/cov
            CHECK(std::abs(cov * (1.0 / cov) - 1.0) < 1e-6);
        }
    CHECK_THROWS(plan_tiles(meta, {128, 48, 48}, 0.25));
}

TEST_CASE("round trip: targets -> nms recovers well-separated picks exactly") {
    VolumeMeta meta{{96, 96, 96}, 10.0};
    ClassCatalog cat = ClassCatalog::default_czii();
    Rng rng(83);
    // rejection-sample picks with out-grid separation > 2*max kernel
    std::vector<Pick> picks;
    for (int tries = 0; tries < 4000 && picks.size() < 8; ++tries) {
        Pick p;
        p.class_id = static_cast<int>(rng.uniform_int(0, 5));
        p.z = rng.uniform(8.0, 87.0);
        p.y = rng.uniform(8.0, 87.0);
        p.x = rng.uniform(8.0, 87.0);
        bool ok = true;
        for (const auto& q : picks) {
            const double dz = (p.z - q.z) / 2.0, dy = (p.y - q.y) / 2.0, dx = (p.x - q.x) / 2.0;
            if (std::sqrt(dz * dz + dy * dy + dx * dx) < 2.0 * 9.0) ok = false;
        }
        if (ok) picks.push_back(p);
    }
    REQUIRE(picks.size() >= 4);
    PickSet ps;
    ps.picks = picks;
    Heatmap hm = synthesize_targets(ps, meta, cat, 2);
    auto dets = nms_decode(hm, cat, {0.5});
    REQUIRE(dets.size() == picks.size());
    for (const auto& p : picks) {
        bool found = false;
        for (const auto& d : dets) {
            if (d.class_id != p.class_id) continue;
            // compare in output-grid voxels
            const double oz = std::floor(p.z / 2.0), dz = (d.z - 1.0) / 2.0;
            const double oy = std::floor(p.y / 2.0), dy = (d.y - 1.0) / 2.0;
            const double ox = std::floor(p.x / 2.0), dx = (d.x - 1.0) / 2.0;
            if (std::abs(oz - dz) <= 1.0 && std::abs(oy - dy) <= 1.0 && std::abs(ox - dx) <= 1.0)
                found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("decode flip equivariance: decode(flip(hm)) == flip(decode(hm))") {
    Rng rng(89);
    Heatmap hm = make_heatmap(1, 12, 12, 12);
    for (auto& v : hm.values.data)
        v = rng.uniform01() < 0.08 ? static_cast<float>(rng.uniform01()) : 0.0f;
    auto base = nms_decode(hm, one_class(80.0), {0.3});
    for (Axis axis : {Axis::Z, Axis::Y, Axis::X}) {
        Heatmap flipped = flip_heatmap(hm, axis);
        auto dets = nms_decode(flipped, one_class(80.0), {0.3});
        REQUIRE(dets.size() == base.size());
        // mirrored coordinates: out voxel i -> (dim-1-i); center offset is
        // symmetric, so input coord c -> dim_in - c
        std::set<std::array<double, 3>> got, want;
        for (const auto& d : dets) got.insert({d.z, d.y, d.x});
        for (const auto& d : base) {
            std::array<double, 3> m{d.z, d.y, d.x};
            m[static_cast<std::size_t>(axis)] = 24.0 - m[static_cast<std::size_t>(axis)];
            want.insert(m);
        }
        CHECK(got == want);
    }
}
