// Builds a subspace from synthetic reader weights, scores five candidates
// whose token states drift further out of it, and picks the lowest SPS.

#include <iomanip>
#include <iostream>

#include "sps/sps.hpp"
#include "sps/synthetic.hpp"

int main() {
  const auto reader = sps::synthetic::make_reader({});
  const auto subspace = sps::build_subspace(reader.weights, 0.95, 42);
  std::cout << "D=" << subspace.dim() << " k=" << subspace.k << " retained=" << subspace.retained_variance << "\n";

  sps::CounterRng rng(1);
  sps::CandidateSet set;
  set.query_id = "demo";
  for (int c = 0; c < 5; ++c) {
    const double misalignment = 0.2 * (4 - c);
    set.candidates.push_back(
        {"c" + std::to_string(c), sps::synthetic::candidate_states(reader.frame, {12, misalignment, 1.5, 0.0}, rng),
         std::nullopt, std::nullopt});
  }

  const auto ranking = sps::rank_candidates(subspace, set, sps::PoolingStrategy::Max);
  for (const auto& s : ranking.scores) {
    std::cout << s.candidate_id << "  sps=" << std::fixed << std::setprecision(4) << s.sps << "\n";
  }
  std::cout << "selected " << ranking.scores[ranking.selected_index].candidate_id << "\n";
}
