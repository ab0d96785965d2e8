#include <cstdio>
#include <cstring>
#include <functional>

#include "geoxray/verify.hpp"

using namespace geoxray;

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  std::vector<Check> out;
  auto run = [&](int id, const std::function<Check()>& f) {
    if (!want(id)) return;
    Check c;
    try {
      c = f();
    } catch (const std::exception& e) {
      c.id = id;
      c.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d (%s): %s\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), c.detail.c_str());
    std::fflush(stdout);
    out.push_back(c);
  };
  run(1, [] { return check_geometry(); });
  run(2, [] { return check_scattering(); });
  run(3, [] { return check_gauge_invariance(); });
  run(4, [] { return check_kernel_annihilation(); });
  run(5, [] { return check_pseudo_linearization(); });
  run(6, [] { return check_symbols(); });
  LocalScalarResult ls;
  if (want(7) || want(13)) ls = run_local_scalar();
  run(7, [&] { return check_local_scalar(ls); });
  run(8, [] { return check_local_pair(); });
  run(9, [] { return check_layer_strip(); });
  run(10, [] { return check_connection_step(); });
  run(11, [] { return check_convexity(); });
  run(12, [] { return check_applications(); });
  run(13, [&] { return check_stability(ls); });

  int failed = 0;
  for (auto& c : out) failed += !c.pass;
  std::printf("%d of %zu criteria passed\n", static_cast<int>(out.size()) - failed, out.size());
  return failed ? 1 : 0;
}
