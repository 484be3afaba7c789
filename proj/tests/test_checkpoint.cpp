#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "v4e/checkpoint.hpp"
#include "v4e/rng.hpp"

using namespace v4e;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* stem) {
    auto p = fs::temp_directory_path() / (std::string("v4e_ckpt_test_") + stem);
    fs::remove(p);
    return p;
}

}  // namespace

TEST_CASE("checkpoint round-trips tensors through float32") {
    Rng rng(1);
    auto t = Tensor<double>::randn({3, 4, 2}, rng);
    Checkpoint ck;
    ck.put_tensor("block.weight", t);
    ck.put_tensor("block.bias", Tensor<double>::full({2}, 0.25));

    auto path = temp_file("roundtrip.ckpt");
    ck.save(path.string());
    auto loaded = Checkpoint::load(path.string());
    CHECK(loaded.size() == 2);
    auto back = loaded.get_tensor<double>("block.weight");
    CHECK(back.shape == t.shape);
    for (int64_t i = 0; i < t.numel(); ++i)
        CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
    fs::remove(path);
}

TEST_CASE("identical contents give byte-identical files") {
    Checkpoint ck;
    ck.put("z", {2}, {1.f, 2.f});
    ck.put("a", {1}, {3.f});
    auto p1 = temp_file("det1.ckpt");
    auto p2 = temp_file("det2.ckpt");
    ck.save(p1.string());
    ck.save(p2.string());
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(!s1.empty());
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("corruption and format errors are explicit") {
    Checkpoint ck;
    ck.put("w", {4}, {1.f, 2.f, 3.f, 4.f});
    auto path = temp_file("corrupt.ckpt");
    ck.save(path.string());

    SUBCASE("bit flip in values fails the integrity check") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-12, std::ios::end);  // inside the float payload
        char z = 0x7f;
        f.write(&z, 1);
        f.close();
        CHECK_THROWS_AS(Checkpoint::load(path.string()), CheckpointError);
    }
    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(Checkpoint::load(path.string()), CheckpointError);
    }
    SUBCASE("truncation") {
        auto sz = fs::file_size(path);
        fs::resize_file(path, sz - 5);
        CHECK_THROWS_AS(Checkpoint::load(path.string()), CheckpointError);
    }
    SUBCASE("missing entry lookup") {
        auto loaded = Checkpoint::load(path.string());
        CHECK_THROWS_AS(loaded.entry("nope"), CheckpointError);
    }
    fs::remove(path);
}

TEST_CASE("content hash tracks parameter changes") {
    Checkpoint a;
    a.put("w", {2}, {1.f, 2.f});
    Checkpoint b;
    b.put("w", {2}, {1.f, 2.000001f});
    CHECK(checkpoint_content_hash(a) == checkpoint_content_hash(a));
    CHECK(checkpoint_content_hash(a) != checkpoint_content_hash(b));
}
