#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "mlcl/checkpoint.hpp"
#include "mlcl/train.hpp"

using namespace mlcl;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/mlcl_ckpt_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("tensor round trip is bit exact") {
    std::vector<NamedTensor> tensors;
    tensors.push_back({"a", {2, 3}, {1.0, -2.5, 3e-300, 4.0, 5.0, 0.1 + 0.2}});
    tensors.push_back({"b.scalar", {1}, {42.0}});
    TempFile f("roundtrip.ckpt");
    save_checkpoint(f.path, tensors);
    const auto loaded = load_checkpoint(f.path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].name == "a");
    CHECK(loaded[0].dims == std::vector<std::uint64_t>{2, 3});
    CHECK(loaded[0].data == tensors[0].data);
    CHECK(loaded[1].name == "b.scalar");
    CHECK(loaded[1].data == tensors[1].data);
}

TEST_CASE("bad magic and truncated payloads are rejected") {
    TempFile f("bad.ckpt");
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS(load_checkpoint(f.path));

    std::vector<NamedTensor> tensors = {{"t", {4}, {1, 2, 3, 4}}};
    save_checkpoint(f.path, tensors);
    // chop the last bytes off the payload
    std::ifstream in(f.path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    out.close();
    CHECK_THROWS(load_checkpoint(f.path));
}

TEST_CASE("missing file is an error") { CHECK_THROWS(load_checkpoint("/tmp/nonexistent.ckpt")); }

TEST_CASE("encoder tensors round trip through naming") {
    SeededRng rng(1);
    const EncoderParams p = init_encoder(5, 7, 2, 4, rng);
    const auto tensors = encoder_to_tensors(p, "encoder");
    CHECK(find_tensor(tensors, "encoder.backbone.0.weight") != nullptr);
    CHECK(find_tensor(tensors, "encoder.proj2.weight") != nullptr);
    CHECK(find_tensor(tensors, "missing") == nullptr);
    const EncoderParams q = encoder_from_tensors(tensors, "encoder");
    CHECK(q.backbone[0].weight.values == p.backbone[0].weight.values);
    CHECK(q.backbone[1].bias == p.backbone[1].bias);
    CHECK(q.proj1.weight.values == p.proj1.weight.values);
    CHECK(q.proj2.weight.values == p.proj2.weight.values);
}

TEST_CASE("full training state survives a file round trip") {
    SeededRng rng(2);
    TrainedState state;
    state.encoder = init_encoder(5, 7, 2, 4, rng);
    state.momentum_encoder = init_encoder(5, 7, 2, 4, rng);
    state.prototypes = init_prototypes(3, 4, rng);
    state.queue_keys = DenseMatrix(2, 4);
    for (double& v : state.queue_keys.values) v = rng.gaussian();
    state.queue_labels = {LabelVector(3, {0, 2}), LabelVector(3, {1})};
    state.decoder = Linear(3, 7, true);
    for (double& v : state.decoder.weight.values) v = rng.gaussian();
    for (double& v : state.decoder.bias) v = rng.gaussian();

    TempFile f("state.ckpt");
    save_checkpoint(f.path, state_to_tensors(state));
    const TrainedState loaded = state_from_tensors(load_checkpoint(f.path));
    CHECK(loaded.encoder.backbone[0].weight.values ==
          state.encoder.backbone[0].weight.values);
    CHECK(loaded.momentum_encoder.proj2.weight.values ==
          state.momentum_encoder.proj2.weight.values);
    CHECK(loaded.prototypes.c.values == state.prototypes.c.values);
    CHECK(loaded.queue_keys.values == state.queue_keys.values);
    REQUIRE(loaded.queue_labels.size() == 2);
    CHECK(loaded.queue_labels[0] == state.queue_labels[0]);
    CHECK(loaded.queue_labels[1] == state.queue_labels[1]);
    CHECK(loaded.decoder.weight.values == state.decoder.weight.values);
    CHECK(loaded.decoder.bias == state.decoder.bias);
}

TEST_CASE("contrastive-only state omits the decoder") {
    SeededRng rng(3);
    TrainedState state;
    state.encoder = init_encoder(4, 6, 1, 3, rng);
    state.momentum_encoder = state.encoder;
    const auto tensors = state_to_tensors(state);
    CHECK(find_tensor(tensors, "decoder.weight") == nullptr);
    const TrainedState loaded = state_from_tensors(tensors);
    CHECK(loaded.decoder.weight.rows == 0);
    CHECK(loaded.queue_keys.rows == 0);
}
