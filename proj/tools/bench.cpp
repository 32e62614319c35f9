// Workload driver: runs one workload against a freshly configured allocator
// and appends a CSV row.

#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "vspan/allocator.hpp"
#include "vspan/bench.hpp"
#include "vspan/size_classes.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vspan workload benchmark"};

  vspan::bench::WorkloadConfig workload;
  std::size_t size = 0;
  std::string csv_path;
  std::string ablate_text;
  std::string provider = "os";
  std::size_t pool_width = 0;
  unsigned reuse_percent = 80;
  std::string ledger_path;
  bool dump_classes = false;
  bool header = false;

  app.add_option("--workload", workload.name, "Workload name")
      ->check(CLI::IsMember(vspan::bench::workload_names()));
  app.add_option("--threads", workload.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--rounds", workload.rounds, "Rounds, epochs or hand-offs");
  app.add_option("--objects", workload.objects_per_round, "Objects per round (0: workload default)");
  app.add_option("--size", size, "Object size in bytes (sets min and max)");
  app.add_option("--min-size", workload.min_size, "Smallest object size");
  app.add_option("--max-size", workload.max_size, "Largest object size");
  app.add_option("--producers", workload.producers, "prodcons: allocating threads (0: symmetric)");
  app.add_option("--duration", workload.duration, "larson_like: seconds per hand-off");
  app.add_option("--seed", workload.seed, "Random seed");
  app.add_option("--csv", csv_path, "Append the result row to this file (default stdout)");
  app.add_option("--ablate", ablate_text, "Comma separated: no_decommit, pool_width_1, lazy_reclaim");
  app.add_option("--provider", provider, "Virtual memory provider")->check(CLI::IsMember({"os", "sim"}));
  app.add_option("--pool-width", pool_width, "Span-pool stacks per size (0: hardware threads)");
  app.add_option("--reuse-threshold", reuse_percent, "Reusability threshold in percent")
      ->check(CLI::Range(0u, 100u));
  app.add_option("--ledger-csv", ledger_path, "Record the fragmentation ledger and write its events here");
  app.add_flag("--dump-size-classes", dump_classes, "Print the size-class table as CSV and exit");
  app.add_flag("--header", header, "Write the CSV header before the row");

  CLI11_PARSE(app, argc, argv);

  if (dump_classes) {
    vspan::write_size_class_csv(std::cout);
    return 0;
  }
  if (size != 0) workload.min_size = workload.max_size = size;

  try {
    const auto flags = vspan::bench::AblationFlags::parse(ablate_text);
    vspan::AllocatorConfig config;
    config.provider = vspan::provider_kind_from_string(provider);
    config.pool_width = pool_width;
    config.reuse_percent = reuse_percent;
    config.ledger = !ledger_path.empty();
    config.ledger_events = config.ledger;
    config = vspan::bench::ablate(config, flags);

    auto allocator = std::make_unique<vspan::Allocator>(config);
    const auto report = vspan::bench::run(workload, *allocator);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!csv_path.empty()) {
      const bool fresh = !std::ifstream(csv_path).good();
      file.open(csv_path, std::ios::app);
      if (!file) {
        std::cerr << "cannot open " << csv_path << "\n";
        return 1;
      }
      out = &file;
      header = header || fresh;
    }
    if (header) vspan::bench::write_csv_header(*out);
    vspan::bench::write_csv_row(*out, workload, config, flags.to_string(), report);

    if (auto* ledger = allocator->ledger()) {
      std::ofstream ledger_file(ledger_path);
      ledger->write_csv(ledger_file);
    }
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
