#pragma once

#include <string>
#include <vector>

namespace uag {

// One question with its gold answer set. topic_entities and answers are
// entity labels; both are nonempty for well-formed samples.
struct QASample {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;
  std::vector<std::string> answers;
  friend bool operator==(const QASample&, const QASample&) = default;
};

}  // namespace uag
