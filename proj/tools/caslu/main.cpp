#include <cstdio>
#include <filesystem>

#include "CLI11.hpp"
#include "caslu/kernels/kernels.hpp"
#include "caslu/util/error.hpp"
#include "common.hpp"

int main(int argc, char** argv) {
  using namespace caslu::cli;
  caslu::kernels::configure_threads_from_env();

  CLI::App app{"Phonetic cross-attention intent classification toolkit"};
  app.set_version_flag("--version", std::string("caslu ") + CASLU_VERSION);
  app.require_subcommand(1);
  int rc = kOk;
  add_synth(app, rc);
  add_gen_data(app, rc);
  add_g2p(app, rc);
  add_train(app, rc);
  add_eval(app, rc);
  add_gradcheck(app, rc);
  add_signtest(app, rc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  } catch (const caslu::DivergenceError& e) {
    std::fprintf(stderr, "error: training diverged: %s\n", e.what());
    return kDiverged;
  } catch (const caslu::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: unexpected failure: %s\n", e.what());
    return kInputError;
  }
  return rc;
}
