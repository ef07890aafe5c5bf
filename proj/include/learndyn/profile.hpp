#ifndef LEARNDYN_PROFILE_HPP
#define LEARNDYN_PROFILE_HPP

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "learndyn/errors.hpp"

namespace learndyn {

using StateIndex = std::size_t;

/// One action index per player. Player indices are 0-based.
class ActionProfile {
 public:
  ActionProfile() = default;
  ActionProfile(std::initializer_list<std::size_t> actions) : actions_(actions) {}
  explicit ActionProfile(std::vector<std::size_t> actions) : actions_(std::move(actions)) {}

  std::size_t size() const noexcept { return actions_.size(); }
  std::size_t operator[](std::size_t i) const { return actions_[i]; }
  std::size_t& operator[](std::size_t i) { return actions_[i]; }

  auto begin() const noexcept { return actions_.begin(); }
  auto end() const noexcept { return actions_.end(); }
  const std::vector<std::size_t>& actions() const noexcept { return actions_; }

  /// Copy with player i's action replaced.
  ActionProfile with(std::size_t player, std::size_t action) const {
    ActionProfile out = *this;
    out.actions_.at(player) = action;
    return out;
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(actions_[i]);
    }
    return s + ")";
  }

  friend bool operator==(const ActionProfile&, const ActionProfile&) = default;
  friend auto operator<=>(const ActionProfile&, const ActionProfile&) = default;

 private:
  std::vector<std::size_t> actions_;
};

/// d_H(a, b): number of coordinates in which the profiles differ.
inline std::size_t hamming_distance(const ActionProfile& a, const ActionProfile& b) {
  if (a.size() != b.size()) throw ArgumentError("hamming_distance: profiles of different length");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

/// Mixed-radix indexing of the joint action space, player 0 least significant.
class ProfileSpace {
 public:
  ProfileSpace() = default;

  explicit ProfileSpace(std::vector<std::size_t> action_sizes) : sizes_(std::move(action_sizes)) {
    if (sizes_.empty()) throw ArgumentError("a game needs at least one player");
    strides_.resize(sizes_.size());
    std::size_t stride = 1;
    bool overflow = false;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      if (sizes_[i] == 0) throw ArgumentError("player " + std::to_string(i) + " has an empty action set");
      strides_[i] = stride;
      if (stride > std::numeric_limits<std::size_t>::max() / sizes_[i]) overflow = true;
      if (!overflow) stride *= sizes_[i];
    }
    size_ = overflow ? std::numeric_limits<std::size_t>::max() : stride;
  }

  std::size_t players() const noexcept { return sizes_.size(); }
  const std::vector<std::size_t>& action_sizes() const noexcept { return sizes_; }
  std::size_t action_count(std::size_t player) const { return sizes_.at(player); }
  std::size_t stride(std::size_t player) const { return strides_.at(player); }

  /// Number of joint profiles; saturates at SIZE_MAX when it does not fit.
  std::size_t size() const noexcept { return size_; }

  std::size_t max_actions() const noexcept {
    std::size_t m = 0;
    for (auto s : sizes_) m = s > m ? s : m;
    return m;
  }
  std::size_t min_actions() const noexcept {
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (auto s : sizes_) m = s < m ? s : m;
    return m;
  }

  bool valid(const ActionProfile& a) const noexcept {
    if (a.size() != sizes_.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] >= sizes_[i]) return false;
    return true;
  }

  void require_valid(const ActionProfile& a) const {
    if (!valid(a)) throw ArgumentError("invalid action profile " + a.to_string());
  }

  StateIndex index(const ActionProfile& a) const {
    require_valid(a);
    StateIndex s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * strides_[i];
    return s;
  }

  ActionProfile profile(StateIndex s) const {
    if (s >= size_) throw ArgumentError("state index " + std::to_string(s) + " out of range");
    std::vector<std::size_t> acts(sizes_.size());
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      acts[i] = s % sizes_[i];
      s /= sizes_[i];
    }
    return ActionProfile(std::move(acts));
  }

  std::size_t action_of(StateIndex s, std::size_t player) const {
    return (s / strides_[player]) % sizes_[player];
  }

  /// Index of the profile obtained from s by setting player's action.
  StateIndex with_action(StateIndex s, std::size_t player, std::size_t action) const {
    const std::size_t cur = action_of(s, player);
    return s - cur * strides_[player] + action * strides_[player];
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

}  // namespace learndyn

#endif  // LEARNDYN_PROFILE_HPP
