#include <cstring>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slim/checkpoint.hpp"
#include "slim/error.hpp"

using slim::Matrix;

TEST(Checkpoint, RoundTripIsF32Exact) {
    slim::TensorMap t;
    t.emplace("b", oracle::random_matrix(3, 5, 1));
    t.emplace("a", Matrix{{0.5, -2.0}});
    std::stringstream ss;
    slim::write_tensors(ss, t);
    const std::string bytes = ss.str();
    EXPECT_EQ(std::memcmp(bytes.data(), slim::kCheckpointMagic, 8), 0);

    const auto back = slim::read_tensors(ss);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.at("a"), t.at("a"));
    const Matrix& b = back.at("b");
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_EQ(b.data()[i], static_cast<double>(static_cast<float>(t.at("b").data()[i])));
    }

    std::stringstream again;
    slim::write_tensors(again, back);
    EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
    std::stringstream bad("NOTMAGIC\0\0\0\0");
    EXPECT_THROW(slim::read_tensors(bad), slim::FormatError);

    slim::TensorMap t{{"x", Matrix{{1, 2, 3}}}};
    std::stringstream ss;
    slim::write_tensors(ss, t);
    std::string bytes = ss.str();
    bytes.resize(bytes.size() - 4);
    std::stringstream truncated(bytes);
    EXPECT_THROW(slim::read_tensors(truncated), slim::FormatError);
}

TEST(Checkpoint, ModelRoundTrip) {
    slim::model::ModelConfig cfg;
    cfg.n_dec = 2;
    cfg.dim_e = 8;
    cfg.dim_h = 12;
    cfg.n_heads = 2;
    cfg.n_expert = 3;
    cfg.top_k = 2;
    const auto layers = slim::model::synth_model(cfg);
    const auto tensors = slim::model_to_tensors(cfg, layers);
    EXPECT_TRUE(tensors.count("layer.1.expert.2.w_u"));
    EXPECT_TRUE(tensors.count("layer.0.router"));

    const auto loaded = slim::model_from_tensors(tensors);
    EXPECT_EQ(loaded.config.n_expert, 3u);
    EXPECT_EQ(loaded.config.dim_h, 12u);
    EXPECT_EQ(loaded.layers[1].experts[2].w_u, layers[1].experts[2].w_u);

    auto broken = tensors;
    broken.erase("layer.1.w_o");
    EXPECT_THROW(slim::model_from_tensors(broken), slim::FormatError);
    broken = tensors;
    broken["layer.0.w_q"] = Matrix(3, 3);
    EXPECT_THROW(slim::model_from_tensors(broken), slim::FormatError);
}
