#include "doctest.h"
#include "gridstore/model.hpp"
#include "helpers.hpp"

using namespace gridstore;
using namespace gridtest;

TEST_CASE("minimal two-bus model validates cleanly") {
  auto [net, demand] = make_sgsl((Vec(4) << 1, 2, 3, 4).finished(), Cap::finite(5));
  CHECK(validate(net, demand).ok());
}

TEST_CASE("disconnected bus is reported") {
  auto [net, demand] = make_sgsl((Vec(2) << 1, 2).finished(), Cap::finite(5));
  net.buses.push_back(make_load(3));
  demand.values[3] = (Vec(2) << 1, 1).finished();
  const auto rep = validate(net, demand);
  CHECK_FALSE(rep.ok());
  CHECK(rep.mentions("graph not connected"));
}

TEST_CASE("bus with both generation and demand is a kind violation") {
  auto [net, demand] = make_sgsl((Vec(2) << 1, 2).finished(), Cap::finite(5));
  demand.values[1] = (Vec(2) << 1, 1).finished();  // generator bus 1
  const auto rep = validate(net, demand);
  CHECK(rep.mentions("bus kind violation"));

  auto [net2, demand2] = make_sgsl((Vec(2) << 1, 2).finished(), Cap::finite(5));
  net2.buses[1].gen_cap = Cap::finite(1);  // load bus 2
  CHECK(validate(net2, demand2).mentions("bus kind violation"));
}

TEST_CASE("validation catches the remaining shape errors") {
  auto [net, demand] = make_sgsl((Vec(2) << 1, 2).finished(), Cap::finite(5));
  SUBCASE("duplicate line") {
    net.lines.push_back({2, 1, 2.0, Cap::finite(3)});
    CHECK(validate(net, demand).mentions("duplicate line"));
  }
  SUBCASE("self loop") {
    net.lines.push_back({2, 2, 1.0, Cap::finite(3)});
    CHECK(validate(net, demand).mentions("self loop"));
  }
  SUBCASE("negative demand needs the renewable flag") {
    demand.values[2][0] = -1;
    CHECK(validate(net, demand).mentions("negative demand"));
    net.buses[1].renewable = true;
    CHECK(validate(net, demand).ok());
  }
  SUBCASE("demand column length must match the period") {
    demand.values[2] = Vec::Ones(3);
    CHECK_FALSE(validate(net, demand).ok());
  }
  SUBCASE("storage parameter ranges") {
    net.storage.eff_charge = 1.2;
    CHECK(validate(net, demand).mentions("eff_charge"));
    net.storage.eff_charge = 0.8;
    net.storage.ramp_charge = 1.3;  // 1/0.8 = 1.25
    CHECK(validate(net, demand).mentions("ramp_charge"));
    net.storage.ramp_charge = 1.25;
    net.storage.ramp_discharge = 1.0;  // above eff_discharge? equal is fine
    CHECK(validate(net, demand).ok());
    net.storage.ramp_discharge = 1.01;
    CHECK(validate(net, demand).mentions("ramp_discharge"));
  }
  SUBCASE("nonnegative cost coefficients") {
    net.buses[0].cost = CostPoly{1, -0.5, 0};
    CHECK(validate(net, demand).mentions("cost"));
  }
}

TEST_CASE("sample mesh classifies as in the paper's example") {
  auto [net, demand] = make_sample_mesh();
  REQUIRE(validate(net, demand).ok());
  const BusPartition part = classify_buses(net);
  CHECK(part.generators == std::vector<int>{1, 2, 7});
  CHECK(part.loads == std::vector<int>{3, 4, 5, 6});
  CHECK(part.single_connection_generators == std::vector<int>{1, 2});
}

TEST_CASE("two-bus chain has a single-connection generator") {
  auto [net, demand] = make_sgsl((Vec(2) << 1, 2).finished(), Cap::finite(5));
  const BusPartition part = classify_buses(net);
  CHECK(part.single_connection_generators == std::vector<int>{1});
}

TEST_CASE("star hub generator is multiply connected") {
  auto [net, demand] =
      make_star({(Vec(2) << 1, 2).finished(), (Vec(2) << 2, 1).finished()},
                {Cap::finite(5), Cap::finite(5)});
  const BusPartition part = classify_buses(net);
  CHECK(part.single_connection_generators.empty());
}

TEST_CASE("degree-based classification agrees with neighbor enumeration") {
  TestRng rng(7);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = rng.uniform_int(2, 7);
    Network net;
    DemandSeries demand;
    demand.period = 2;
    for (int i = 1; i <= n; ++i) {
      if (i == 1 || rng.uniform() < 0.4) {
        net.buses.push_back(make_generator(i, Cap::finite(10), {1, 0, 0}));
      } else {
        net.buses.push_back(make_load(i));
        demand.values[i] = random_demand(rng, 2, 0, 3);
      }
    }
    for (int i = 2; i <= n; ++i)
      net.lines.push_back({rng.uniform_int(1, i - 1), i, 1.0, Cap::finite(10)});
    net.slack_bus = 1;

    const BusPartition part = classify_buses(net);
    std::vector<int> brute;
    for (const Bus& b : net.buses)
      if (b.is_generator() && net.neighbors(b.id).size() == 1) brute.push_back(b.id);
    CHECK(part.single_connection_generators == brute);
  }
}

TEST_CASE("slack defaults to the lowest generator id") {
  auto [net, demand] = make_sample_mesh();
  CHECK(net.default_slack() == 1);
  net.buses[0].kind = BusKind::Load;  // knock out generator 1
  net.buses[0].gen_cap.reset();
  net.buses[0].cost.reset();
  CHECK(net.default_slack() == 2);
}
