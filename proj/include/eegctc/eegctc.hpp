/* Copyright 2026 The eegctc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef EEGCTC_EEGCTC_HPP_
#define EEGCTC_EEGCTC_HPP_

#include "eegctc/binary_io.hpp"
#include "eegctc/config.hpp"
#include "eegctc/ctc.hpp"
#include "eegctc/eegnet.hpp"
#include "eegctc/errors.hpp"
#include "eegctc/grad_check.hpp"
#include "eegctc/lstm.hpp"
#include "eegctc/model.hpp"
#include "eegctc/ops.hpp"
#include "eegctc/prng.hpp"
#include "eegctc/synth.hpp"
#include "eegctc/tensor.hpp"
#include "eegctc/train.hpp"

#endif  // EEGCTC_EEGCTC_HPP_
