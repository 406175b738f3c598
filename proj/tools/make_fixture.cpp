// Writes the synthetic demo corpus, judge scores and a pipeline config.

#include <CLI11.hpp>

#include <iostream>

#include "fixture.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic demo corpus"};
    std::string dir = "demo";
    fixture::Spec spec;
    app.add_option("dir", dir, "output directory")->capture_default_str();
    app.add_option("--seed", spec.seed)->capture_default_str();
    app.add_option("--topics", spec.topics)->capture_default_str();
    app.add_option("--per-topic", spec.per_topic)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    const auto corpus = fixture::generate(spec);
    fixture::write(corpus, dir);
    std::cout << "wrote " << corpus.records.size() << " records to " << dir << "\n";
    return 0;
}
