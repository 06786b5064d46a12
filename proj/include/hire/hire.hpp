#ifndef HIRE_HIRE_HPP
#define HIRE_HIRE_HPP

#include "hire/bundle.hpp"
#include "hire/common.hpp"
#include "hire/data.hpp"
#include "hire/eval.hpp"
#include "hire/hierarchy.hpp"
#include "hire/io.hpp"
#include "hire/mda.hpp"
#include "hire/model.hpp"
#include "hire/persist.hpp"
#include "hire/synth.hpp"

#endif // HIRE_HIRE_HPP
