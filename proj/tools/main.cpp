#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "ftp/config.hpp"
#include "ftp/errors.hpp"
#include "ftp/experiment.hpp"
#include "ftp/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Task-space planning and reach-control experiments"};
  std::string config_path;
  std::string seeds;
  std::string out;
  std::string mode;
  app.add_option("--config", config_path, "Experiment JSON document")->required();
  app.add_option("--seeds", seeds, "Comma-separated seed list (overrides the document)");
  app.add_option("--out", out, "Output directory (overrides the document)");
  app.add_option("--mode", mode, "train | evaluate | plan | track | bench")
      ->check(CLI::IsMember({"train", "evaluate", "plan", "track", "bench"}));
  CLI11_PARSE(app, argc, argv);

  try {
    using ftp::config::json;
    const std::filesystem::path path = config_path;
    json doc;
    try {
      doc = json::parse(ftp::io::read_text(path));
    } catch (const json::exception& e) {
      throw ftp::ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ftp::ConfigError(path.string() + ": expected a JSON object");
    auto vars = ftp::config::process_environment();
    if (!mode.empty()) vars.emplace_back("FTP_MODE", json(mode).dump());
    if (!seeds.empty()) {
      json list = json::array();
      for (auto s : ftp::config::parse_seed_list(seeds)) list.push_back(s);
      vars.emplace_back("FTP_SEEDS", list.dump());
    }
    if (!out.empty()) vars.emplace_back("FTP_OUT", json(std::filesystem::absolute(out).string()).dump());
    const auto ex = ftp::config::experiment_from_json(doc, path.parent_path(), vars);
    std::cerr << "mode " << ex.mode << ", config_hash " << ex.hash << ", out " << ex.out_dir.string() << '\n';
    ftp::experiment::run(ex, std::cerr);
  } catch (const ftp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
