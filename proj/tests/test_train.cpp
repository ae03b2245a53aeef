#include <doctest.h>

#include <numeric>

#include "lesionseg/phantom.hpp"
#include "lesionseg/train.hpp"

using namespace lesionseg;

namespace {

std::vector<Subject> tiny_cohort(int n_subjects, std::uint64_t seed, int dim = 24,
                                 int lesions = 3) {
    PhantomConfig cfg;
    cfg.dims = {dim, dim, dim};
    cfg.n_subjects = n_subjects;
    cfg.lesions_min = lesions;
    cfg.lesions_max = lesions;
    cfg.seed = seed;
    return generate_phantom_cohort(cfg);
}

NetConfig tiny_net_config(NormMode mode = NormMode::BN) {
    NetConfig cfg;
    cfg.channels = {4, 8};
    cfg.norm = mode;
    return cfg;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t count) {
    return std::accumulate(v.begin() + from, v.begin() + from + count, 0.0) / double(count);
}

} // namespace

TEST_CASE("contrast dropout") {
    SUBCASE("a single available contrast is never dropped") {
        MultiContrastVolume mcv;
        mcv.set(Contrast::PDw, Volume3D({4, 4, 4}));
        std::mt19937_64 rng(1);
        for (int k = 0; k < 50; ++k) {
            MultiContrastVolume out = contrast_dropout(mcv, rng);
            CHECK(out.availability_mask() == mcv.availability_mask());
        }
    }

    SUBCASE("kept subsets are uniform over the 15 nonempty subsets") {
        MultiContrastVolume mcv;
        for (Contrast c : kAllContrasts)
            mcv.set(c, Volume3D({2, 2, 2}));
        std::mt19937_64 rng(7);
        std::array<int, 16> freq{};
        for (int k = 0; k < 15000; ++k)
            ++freq[std::size_t(sample_kept_subset(mcv.availability_mask(), rng))];
        CHECK(freq[0] == 0);
        for (int s = 1; s <= 15; ++s) {
            CHECK(freq[std::size_t(s)] > 800); // 1000 +- 20%
            CHECK(freq[std::size_t(s)] < 1200);
        }
    }

    SUBCASE("dropping a contrast zeroes it and clears the bit") {
        MultiContrastVolume mcv;
        for (Contrast c : kAllContrasts) {
            Volume3D v({3, 3, 3});
            std::fill(v.data().begin(), v.data().end(), 1.0f + float(int(c)));
            mcv.set(c, std::move(v));
        }
        std::mt19937_64 rng(3);
        bool dropped_flair = false;
        for (int k = 0; k < 100 && !dropped_flair; ++k) {
            MultiContrastVolume out = contrast_dropout(mcv, rng);
            if (!out.available(Contrast::FLAIR)) {
                dropped_flair = true;
                CHECK((out.availability_mask() & 0b1000) == 0);
                Volume3D zeroed = out.materialized(Contrast::FLAIR);
                for (float v : zeroed.data())
                    CHECK(v == 0.0f);
            }
        }
        CHECK(dropped_flair);
    }

    SUBCASE("empty availability is rejected") {
        std::mt19937_64 rng(4);
        CHECK_THROWS_AS(sample_kept_subset(0, rng), config_error);
    }
}

TEST_CASE("overfitting one phantom subject halves the training loss") {
    auto cohort = tiny_cohort(1, 42);
    UNet net(tiny_net_config());
    net.init_weights(11);

    TrainConfig cfg;
    cfg.iterations = 200;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    cfg.contrast_dropout = false;
    cfg.spatial_augment = false;
    cfg.seed = 5;

    Trainer trainer(net, cfg);
    auto losses = trainer.run(cohort, 200);
    REQUIRE(losses.size() == 200);
    const double first = losses[0];
    const double last = mean_of(losses, 190, 10);
    INFO("first ", first, " last ", last);
    CHECK(last <= 0.5 * first);
}

TEST_CASE("training is deterministic given the seed") {
    auto cohort = tiny_cohort(2, 9);

    auto run_once = [&] {
        UNet net(tiny_net_config(NormMode::IN));
        net.init_weights(21);
        TrainConfig cfg;
        cfg.batch_size = 2;
        cfg.seed = 31;
        Trainer trainer(net, cfg);
        (void)trainer.run(cohort, 25);
        std::vector<double> flat;
        for (auto& p : net.params())
            flat.insert(flat.end(), p.w->begin(), p.w->end());
        return flat;
    };

    CHECK(run_once() == run_once()); // bitwise-identical weights
}

TEST_CASE("identical rater masks make rater sampling a no-op") {
    auto cohort = tiny_cohort(1, 13);
    cohort[0].rater2 = cohort[0].rater1;

    auto run_with = [&](bool sampling) {
        UNet net(tiny_net_config());
        net.init_weights(33);
        TrainConfig cfg;
        cfg.batch_size = 2;
        cfg.rater_sampling = sampling;
        cfg.seed = 17;
        Trainer trainer(net, cfg);
        return trainer.run(cohort, 15);
    };

    CHECK(run_with(true) == run_with(false));
}

TEST_CASE("a dataset without lesions is unsampleable") {
    auto cohort = tiny_cohort(2, 3, 24, /*lesions=*/0);
    UNet net(tiny_net_config());
    net.init_weights(1);
    TrainConfig cfg;
    cfg.seed = 1;
    Trainer trainer(net, cfg);
    CHECK_THROWS_AS(trainer.run(cohort, 1), data_error);
}

TEST_CASE("resuming from a checkpoint continues near the pre-stop loss") {
    auto cohort = tiny_cohort(1, 55);
    const std::string path = "/tmp/lesionseg_test_resume.bin";

    UNet net(tiny_net_config());
    net.init_weights(61);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    cfg.contrast_dropout = false;
    cfg.spatial_augment = false;
    cfg.seed = 71;

    Trainer trainer(net, cfg);
    auto losses = trainer.run(cohort, 160);
    const double pre_stop = mean_of(losses, 150, 10);
    TrainerState st = trainer.state();
    save_checkpoint(net, path, &st);

    TrainerState st2;
    UNet resumed = load_checkpoint(path, &st2);
    Trainer trainer2(resumed, cfg);
    trainer2.restore(st2);
    CHECK(trainer2.iterations_done() == 160);
    auto more = trainer2.run(cohort, 10);
    const double post = mean_of(more, 0, 10);
    INFO("pre ", pre_stop, " post ", post);
    CHECK(std::abs(post - pre_stop) <= 0.1 * std::max(pre_stop, post));
    std::remove(path.c_str());
}

TEST_CASE("conditional-norm training with dropout exercises per-sample combos") {
    auto cohort = tiny_cohort(1, 77);
    UNet net(tiny_net_config(NormMode::CondIN));
    net.init_weights(81);
    TrainConfig cfg;
    cfg.batch_size = 3;
    cfg.contrast_dropout = true;
    cfg.seed = 91;
    Trainer trainer(net, cfg);
    auto losses = trainer.run(cohort, 5);
    for (double l : losses) {
        CHECK(std::isfinite(l));
        CHECK(l >= 0.0);
    }
}
