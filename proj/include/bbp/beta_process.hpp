#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bbp/random.hpp"

namespace bbp {

// Parameters of the completely random measure underlying the feature model.
struct BpParams {
  double mass = 1.0;           // expected total weight of a full draw
  double concentration = 1.0;  // controls how fast round weights decay
  double discount = 0.0;       // in [0,1); positive values give power laws
};

// Throws std::domain_error naming the violated constraint.
void validate(const BpParams& params);

// Density of the weight component of the rate measure, excluding the mass
// factor (callers multiply by mass when integrating over labels).
double levy_density(double u, const BpParams& params);

// Distribution of the stick proportion at a given level (level >= 1).
DistSpec stick_distribution(const BpParams& params, std::int64_t level);

struct BetaProcessDraw {
  std::vector<double> weights;       // each strictly in (0,1)
  std::vector<std::int64_t> rounds;  // nondecreasing, round index per atom
  std::vector<double> atom_labels;   // uniform stand-ins for base-measure draws
  std::int64_t truncation_rounds = 0;

  std::size_t size() const { return weights.size(); }
  double total_mass() const;
};

// Underlying stick proportions per atom (levels 1..round), kept only when
// requested; the product of (1 - lower levels) times the top level
// reconstructs the stored weight.
struct StickTrace {
  std::vector<std::vector<double>> proportions;
};

BetaProcessDraw stick_break(const BpParams& params, std::int64_t rounds,
                            RandomStream& stream, StickTrace* trace = nullptr);

// Frequencies of one shared stick chain: one atom per round, all atoms built
// from the same stick sequence, so the weights sum to at most one. A
// size-biased pick from this draw follows the level-one stick law once the
// chain is deep enough; it is the distribution-law oracle.
BetaProcessDraw stick_frequency_chain(const BpParams& params,
                                      std::int64_t rounds,
                                      RandomStream& stream);

// Returns one atom weight chosen with probability proportional to itself.
double size_biased_pick(const BetaProcessDraw& draw, RandomStream& stream);

// Monte-Carlo estimate of the mass lost to truncation after `rounds` rounds.
double residual_mass_estimate(const BpParams& params, std::int64_t rounds,
                              std::int64_t replicates, RandomStream& stream);

}  // namespace bbp
