#include "regmem/errors.hpp"

#include <exception>

namespace regmem {

void rethrow_with_context(const std::string& context) {
    try {
        throw;
    } catch (const NonConvergence& e) {
        throw NonConvergence(context + ": " + e.what());
    } catch (const StepTooLarge& e) {
        throw StepTooLarge(context + ": " + e.what());
    } catch (const SingularMatrix& e) {
        throw SingularMatrix(context + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(context + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(context + ": " + e.what());
    }
}

}  // namespace regmem
