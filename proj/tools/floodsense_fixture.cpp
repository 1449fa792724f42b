// Writes a synthetic flood event (corpus, images, dictionaries, gazetteer,
// boundary, population, config) to a directory.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "floodsense/testing/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic flood event generator"};
  std::string dir;
  floodsense::testing::EventSpec spec;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--seed", spec.seed, "Random seed");
  app.add_option("--image-posts", spec.image_posts, "Geolocatable posts with photos");
  app.add_option("--text-only", spec.geolocatable_text_only, "Geolocatable text-only posts");
  CLI11_PARSE(app, argc, argv);

  const auto truth = floodsense::testing::write_event(dir, spec);
  std::cout << "wrote " << dir << "/config.json\n"
            << "matching posts in window: " << truth.all_posts << '\n'
            << "without retweets: " << truth.no_retweets << '\n'
            << "with images: " << truth.with_images << '\n'
            << "images: " << truth.overall_images << '\n';
  return 0;
}
